#include "cogdiag/eval.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "cogdiag/dataset.hpp"
#include "cogdiag/error.hpp"
#include "cogdiag/esve.hpp"

namespace cogdiag {

ConsistencyReference consistency_reference(std::span<const CellRef> test_cells,
                                           const ResponseMatrix& responses,
                                           const std::vector<std::optional<SkillProfile>>& profiles,
                                           const QMatrix& q) {
    const std::size_t M = q.question_count();
    const std::size_t buckets = q.skill_count() + 1;
    ConsistencyReference ref;
    ref.s_ref.assign(M, std::vector<RateCell>(buckets));
    ref.g_ref.assign(M, std::vector<RateCell>(buckets));

    for (const auto& cell : test_cells) {
        if (!profiles[cell.student]) continue;
        const auto& profile = *profiles[cell.student];
        const std::uint8_t correct = responses.at(cell.student, cell.question) == Cell::Correct;
        if (ideal_response(profile, q.rows[cell.question])) {
            RateCell& bucket = ref.s_ref[cell.question][static_cast<std::size_t>(profile.level())];
            bucket.den += 1;
            if (!correct) bucket.num += 1;
        } else {
            const int lacking = deficiency(profile, q.rows[cell.question]);
            RateCell& bucket = ref.g_ref[cell.question][static_cast<std::size_t>(lacking)];
            bucket.den += 1;
            if (correct) bucket.num += 1;
        }
    }
    return ref;
}

namespace {

std::optional<DistortionValue> distortion_side(
    const std::vector<std::vector<RateCell>>& ref_grid,
    const std::function<double(std::size_t, int)>& model_rate) {
    DistortionValue value;
    double sum = 0;
    for (std::size_t j = 0; j < ref_grid.size(); ++j) {
        for (std::size_t k = 0; k < ref_grid[j].size(); ++k) {
            ++value.total_buckets;
            if (!ref_grid[j][k].defined()) continue;
            ++value.defined_buckets;
            sum += std::abs(model_rate(j, static_cast<int>(k)) - ref_grid[j][k].rate());
        }
    }
    if (value.defined_buckets == 0) return std::nullopt;
    value.defined_mean = sum / static_cast<double>(value.defined_buckets);
    value.full_grid_mean = sum / static_cast<double>(value.total_buckets);
    return value;
}

}  // namespace

DistortionReport distortion(const SlipGuessTable& table, const ConsistencyReference& ref) {
    DistortionReport report;
    report.s_delta = distortion_side(
        ref.s_ref, [&](std::size_t j, int level) { return table.slip_rate(j, level); });
    report.g_delta = distortion_side(
        ref.g_ref, [&](std::size_t j, int lacking) { return table.guess_rate(j, lacking); });
    return report;
}

std::string heatmap_csv(const std::vector<std::vector<RateCell>>& grid, const QMatrix& q,
                        const std::string& bucket_name) {
    std::string csv = "question_id";
    if (!grid.empty())
        for (std::size_t k = 0; k < grid.front().size(); ++k)
            csv += "," + bucket_name + "_" + std::to_string(k);
    csv += '\n';
    for (std::size_t j = 0; j < grid.size(); ++j) {
        csv += q.question_ids[j];
        for (const auto& bucket : grid[j]) {
            if (bucket.defined()) {
                char buffer[32];
                auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), bucket.rate());
                csv += ',';
                csv.append(buffer, end);
            } else {
                csv += ",NA";
            }
        }
        csv += '\n';
    }
    return csv;
}

const char* model_name(ModelKind model) {
    switch (model) {
        case ModelKind::DinaEm: return "dina-em";
        case ModelKind::EsveSi: return "esve-si";
        case ModelKind::EsveSd: return "esve-sd";
    }
    return "?";
}

const char* q_source_name(QSourceKind source) {
    switch (source) {
        case QSourceKind::File: return "file";
        case QSourceKind::Qst: return "qst";
        case QSourceKind::Hbca: return "hbca";
    }
    return "?";
}

ModelKind parse_model(const std::string& name) {
    if (name == "dina-em") return ModelKind::DinaEm;
    if (name == "esve-si") return ModelKind::EsveSi;
    if (name == "esve-sd") return ModelKind::EsveSd;
    throw ConfigError("unknown model '" + name + "' (expected dina-em, esve-si or esve-sd)");
}

QSourceKind parse_q_source(const std::string& name) {
    if (name == "file") return QSourceKind::File;
    if (name == "qst") return QSourceKind::Qst;
    if (name == "hbca") return QSourceKind::Hbca;
    throw ConfigError("unknown q-source '" + name + "' (expected file, qst or hbca)");
}

FittedModel fit_model(ModelKind kind, const ResponseMatrix& responses, const QMatrix& q,
                      std::span<const CellRef> training_cells, RandomSource rng, unsigned workers,
                      double smoothing, const EmConfig& em_config, bool need_profiles) {
    FittedModel model;
    model.kind = kind;
    if (kind == ModelKind::DinaEm) {
        EmConfig config = em_config;
        config.workers = workers;
        model.em = em_fit(responses, q, training_cells, config, rng.derive(0));
        // SI table view of the EM rates for consistency/distortion reports.
        model.table.mode = SgMode::StudentIndependent;
        model.table.si_slip.resize(q.question_count());
        model.table.si_guess.resize(q.question_count());
        for (std::size_t j = 0; j < q.question_count(); ++j) {
            model.table.si_slip[j] = {model.em.slip[j], 1.0};
            model.table.si_guess[j] = {model.em.guess[j], 1.0};
        }
        model.table.question_train_mean.assign(q.question_count(), 0.5);
        if (need_profiles)
            model.profiles = em_map_profiles(model.em, responses, q, training_cells, workers);
        else
            model.profiles.assign(responses.student_count(), std::nullopt);
        return model;
    }

    const auto results = esve_solve_all(responses, q, training_cells, rng.derive(0), workers);
    model.table = kind == ModelKind::EsveSd
                      ? estimate_sd(results, responses, q, training_cells, smoothing)
                      : estimate_si(results, responses, q, training_cells, smoothing);
    model.profiles = extract_profiles(results);
    return model;
}

PredictionBatch model_predict(const FittedModel& model, const ResponseMatrix& responses,
                              const QMatrix& q, std::span<const CellRef> training_cells,
                              std::span<const CellRef> target_cells, unsigned workers) {
    if (model.kind == ModelKind::DinaEm) {
        PredictionBatch batch;
        batch.probability =
            em_predict(model.em, responses, q, training_cells, target_cells, workers);
        batch.used_fallback.assign(target_cells.size(), 0);
        return batch;
    }
    return predict_all(model.profiles, q, model.table, target_cells);
}

ExperimentReport run_experiment(const ResponseMatrix& responses,
                                const std::optional<QMatrix>& expert_q,
                                const ExperimentConfig& config) {
    if (config.repeat < 1) throw ConfigError("repeat must be >= 1");
    if (config.q_source == QSourceKind::File && !expert_q)
        throw ConfigError("q-source 'file' requires an expert Q-matrix");

    ExperimentReport report;
    report.model = model_name(config.model);
    report.q_source = q_source_name(config.q_source);
    report.test_ratio = config.test_ratio;
    report.repeat = config.repeat;
    report.seed = config.seed;

    const RandomSource base(config.seed);
    double mae_sum = 0, rmse_sum = 0, auc_sum = 0;
    std::size_t auc_defined = 0;

    for (int trial = 0; trial < config.repeat; ++trial) {
        RandomSource trial_rng = base.derive(static_cast<std::uint64_t>(trial));
        const double validation_ratio =
            config.q_source == QSourceKind::File ? 0.0 : config.validation_ratio;
        const DataSplit ds =
            split(responses, config.test_ratio, validation_ratio, trial_rng.derive(0));

        TrialResult trial_result;
        trial_result.seed = trial_rng.seed();

        QMatrix q;
        std::vector<CellRef> fit_cells;
        if (config.q_source == QSourceKind::File) {
            q = *expert_q;
            fit_cells = ds.train;
        } else {
            HbcaConfig hbca = config.hbca;
            if (config.q_source == QSourceKind::Qst) hbca.iterations = 0;
            hbca.workers = config.workers;
            hbca.smoothing = config.smoothing;
            const HbcaResult labeled = hbca_run(responses, ds, hbca, trial_rng.derive(1));
            q = labeled.best.q;
            trial_result.hbca_dim = labeled.best_dim;
            if (trial == 0) report.labeled_q = q;
            // Final fit uses the entire training set, validation included.
            fit_cells = merge_cells(ds.train, ds.validation);
        }

        const FittedModel model =
            fit_model(config.model, responses, q, fit_cells, trial_rng.derive(2), config.workers,
                      config.smoothing, config.em, config.consistency);
        const PredictionBatch batch =
            model_predict(model, responses, q, fit_cells, ds.test, config.workers);
        const auto truth = observed_truth(responses, ds.test);

        trial_result.metrics.mae = mae(batch.probability, truth);
        trial_result.metrics.rmse = rmse(batch.probability, truth);
        trial_result.metrics.auc = auc(batch.probability, truth);
        trial_result.metrics.n_cells = ds.test.size();

        if (config.consistency) {
            const ConsistencyReference ref =
                consistency_reference(ds.test, responses, model.profiles, q);
            trial_result.distortion = distortion(model.table, ref);
            if (trial == 0) report.reference = ref;
        }

        mae_sum += trial_result.metrics.mae;
        rmse_sum += trial_result.metrics.rmse;
        if (trial_result.metrics.auc) {
            auc_sum += *trial_result.metrics.auc;
            ++auc_defined;
        }
        report.trials.push_back(std::move(trial_result));
    }

    report.mean_mae = mae_sum / config.repeat;
    report.mean_rmse = rmse_sum / config.repeat;
    if (auc_defined > 0) report.mean_auc = auc_sum / static_cast<double>(auc_defined);
    return report;
}

namespace {

nlohmann::json distortion_json(const DistortionReport& report) {
    auto side = [](const std::optional<DistortionValue>& value) -> nlohmann::json {
        if (!value) return nullptr;
        return {{"defined_mean", value->defined_mean},
                {"full_grid_mean", value->full_grid_mean},
                {"defined_buckets", value->defined_buckets},
                {"total_buckets", value->total_buckets}};
    };
    return {{"s_delta", side(report.s_delta)}, {"g_delta", side(report.g_delta)}};
}

}  // namespace

std::string experiment_report_json(const ExperimentReport& report) {
    nlohmann::json doc;
    doc["model"] = report.model;
    doc["q_source"] = report.q_source;
    doc["test_ratio"] = report.test_ratio;
    doc["repeat"] = report.repeat;
    doc["seed"] = report.seed;
    auto& trials = doc["trials"];
    trials = nlohmann::json::array();
    for (const auto& trial : report.trials) {
        nlohmann::json entry;
        entry["seed"] = trial.seed;
        entry["mae"] = trial.metrics.mae;
        entry["rmse"] = trial.metrics.rmse;
        if (trial.metrics.auc)
            entry["auc"] = *trial.metrics.auc;
        else
            entry["auc"] = nullptr;
        entry["n_cells"] = trial.metrics.n_cells;
        if (trial.hbca_dim > 0) entry["dim_qv"] = trial.hbca_dim;
        if (trial.distortion) entry["distortion"] = distortion_json(*trial.distortion);
        trials.push_back(std::move(entry));
    }
    doc["mean"] = {{"mae", report.mean_mae}, {"rmse", report.mean_rmse}};
    if (report.mean_auc)
        doc["mean"]["auc"] = *report.mean_auc;
    else
        doc["mean"]["auc"] = nullptr;
    return doc.dump(2) + "\n";
}

std::string experiment_report_table(const ExperimentReport& report) {
    char line[160];
    std::string out;
    std::snprintf(line, sizeof(line), "%-10s %-8s %6s %8s %8s %8s %8s\n", "model", "q", "trial",
                  "test%", "MAE", "RMSE", "AUC");
    out += line;
    for (std::size_t t = 0; t < report.trials.size(); ++t) {
        const auto& metrics = report.trials[t].metrics;
        if (metrics.auc)
            std::snprintf(line, sizeof(line), "%-10s %-8s %6zu %8.1f %8.4f %8.4f %8.4f\n",
                          report.model.c_str(), report.q_source.c_str(), t + 1,
                          100.0 * report.test_ratio, metrics.mae, metrics.rmse, *metrics.auc);
        else
            std::snprintf(line, sizeof(line), "%-10s %-8s %6zu %8.1f %8.4f %8.4f %8s\n",
                          report.model.c_str(), report.q_source.c_str(), t + 1,
                          100.0 * report.test_ratio, metrics.mae, metrics.rmse, "NA");
        out += line;
    }
    if (report.mean_auc)
        std::snprintf(line, sizeof(line), "%-10s %-8s %6s %8.1f %8.4f %8.4f %8.4f\n",
                      report.model.c_str(), report.q_source.c_str(), "mean",
                      100.0 * report.test_ratio, report.mean_mae, report.mean_rmse,
                      *report.mean_auc);
    else
        std::snprintf(line, sizeof(line), "%-10s %-8s %6s %8.1f %8.4f %8.4f %8s\n",
                      report.model.c_str(), report.q_source.c_str(), "mean",
                      100.0 * report.test_ratio, report.mean_mae, report.mean_rmse, "NA");
    out += line;
    return out;
}

}  // namespace cogdiag
