#pragma once

#include <optional>
#include <span>
#include <string>

#include "cogdiag/dina_em.hpp"
#include "cogdiag/hbca.hpp"
#include "cogdiag/metrics.hpp"
#include "cogdiag/predict.hpp"
#include "cogdiag/types.hpp"

namespace cogdiag {

struct MetricSet {
    double mae = 0;
    double rmse = 0;
    std::optional<double> auc;
    std::size_t n_cells = 0;
};

/// Reference slip/guess rates from held-out outcomes: s_ref[j][level] counts
/// test slips among ideal-correct cells at that student level, g_ref[j][def]
/// counts test guesses among ideal-wrong cells at that deficiency.
struct ConsistencyReference {
    std::vector<std::vector<RateCell>> s_ref;  // [question][level 0..K]
    std::vector<std::vector<RateCell>> g_ref;  // [question][deficiency 0..K]
};

ConsistencyReference consistency_reference(std::span<const CellRef> test_cells,
                                           const ResponseMatrix& responses,
                                           const std::vector<std::optional<SkillProfile>>& profiles,
                                           const QMatrix& q);

/// Mean absolute difference between a fitted table and the reference.
/// defined_mean averages over populated reference buckets only;
/// full_grid_mean divides the same sum by the full M x (K+1) grid.
struct DistortionValue {
    double defined_mean = 0;
    double full_grid_mean = 0;
    std::size_t defined_buckets = 0;
    std::size_t total_buckets = 0;
};

struct DistortionReport {
    std::optional<DistortionValue> s_delta;
    std::optional<DistortionValue> g_delta;
};

DistortionReport distortion(const SlipGuessTable& table, const ConsistencyReference& ref);

/// Fig-4(a)-style grid as CSV; unpopulated buckets print NA.
std::string heatmap_csv(const std::vector<std::vector<RateCell>>& grid, const QMatrix& q,
                        const std::string& bucket_name);

enum class ModelKind { DinaEm, EsveSi, EsveSd };
enum class QSourceKind { File, Qst, Hbca };

const char* model_name(ModelKind model);
const char* q_source_name(QSourceKind source);
ModelKind parse_model(const std::string& name);
QSourceKind parse_q_source(const std::string& name);

/// A trained model behind one interface: ESVE profiles + slip/guess table,
/// or an EM state (its table view is used for distortion).
struct FittedModel {
    ModelKind kind = ModelKind::EsveSd;
    std::vector<std::optional<SkillProfile>> profiles;
    SlipGuessTable table;
    EmState em;
};

FittedModel fit_model(ModelKind kind, const ResponseMatrix& responses, const QMatrix& q,
                      std::span<const CellRef> training_cells, RandomSource rng, unsigned workers,
                      double smoothing, const EmConfig& em_config, bool need_profiles = false);

PredictionBatch model_predict(const FittedModel& model, const ResponseMatrix& responses,
                              const QMatrix& q, std::span<const CellRef> training_cells,
                              std::span<const CellRef> target_cells, unsigned workers);

struct ExperimentConfig {
    ModelKind model = ModelKind::EsveSd;
    QSourceKind q_source = QSourceKind::File;
    double test_ratio = 0.2;
    double validation_ratio = 0.2;  // share of train held out for QST/HBCA selection
    int repeat = 5;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    double smoothing = 0.0;
    bool consistency = false;
    EmConfig em;
    HbcaConfig hbca;
};

struct TrialResult {
    std::uint64_t seed = 0;
    MetricSet metrics;
    std::optional<DistortionReport> distortion;
    int hbca_dim = 0;  // chosen dim_qv when the Q-matrix was labeled
};

struct ExperimentReport {
    std::string model;
    std::string q_source;
    double test_ratio = 0;
    int repeat = 0;
    std::uint64_t seed = 0;
    std::vector<TrialResult> trials;
    double mean_mae = 0;
    double mean_rmse = 0;
    std::optional<double> mean_auc;
    std::optional<ConsistencyReference> reference;  // first trial, for heatmap export
    std::optional<QMatrix> labeled_q;               // first trial, when Q was labeled
};

/// Repeated seeded trials of the PEP task: split, obtain Q (file / QST /
/// HBCA), fit, predict the test cells, score. Splits are resampled per trial.
ExperimentReport run_experiment(const ResponseMatrix& responses,
                                const std::optional<QMatrix>& expert_q,
                                const ExperimentConfig& config);

std::string experiment_report_json(const ExperimentReport& report);
std::string experiment_report_table(const ExperimentReport& report);

}  // namespace cogdiag
