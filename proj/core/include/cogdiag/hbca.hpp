#pragma once

#include <optional>
#include <span>
#include <string>

#include "cogdiag/dina_em.hpp"
#include "cogdiag/random.hpp"
#include "cogdiag/types.hpp"

namespace cogdiag {

/// Conditional-accuracy graph over questions. beta[w*M+z] estimates
/// P(X_z correct | X_w correct) from co-observed training cells; an edge
/// (w, z) with beta >= eta reads "w covers z" (z is relatively easier).
struct CoveringGraph {
    std::size_t question_count = 0;
    std::vector<std::string> question_ids;
    std::vector<double> beta;                 // M*M row-major, parent w x child z
    std::vector<std::uint8_t> beta_defined;   // 0 where no co-observation supports the entry
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // (parent, child)
    std::vector<std::vector<std::uint32_t>> children;            // children[w], ascending
    std::vector<std::uint32_t> parent_count;                     // incoming edges per question

    double beta_at(std::size_t w, std::size_t z) const { return beta[w * question_count + z]; }
};

CoveringGraph build_covering_graph(const ResponseMatrix& responses,
                                   std::span<const CellRef> training_cells, double eta);

/// Heuristic Q-matrix initialisation: questions are processed in descending
/// parent-count order (easy to difficult, ties by index). A question whose
/// children are all unassigned gets a random nonzero row (Bernoulli
/// leaf_density per bit); otherwise its row is the OR of its assigned
/// children's rows with each zero bit flipped on with probability flip_prob.
QMatrix qst_init(const CoveringGraph& graph, int dim_qv, double flip_prob, double leaf_density,
                 RandomSource& rng);

/// True iff the correct student's profile is componentwise <= the wrong
/// student's profile; impossible without noise.
bool da_conflict_condition(const BitVec& correct_profile, const BitVec& wrong_profile);

/// Dual bound estimation for one question from labelled student profiles.
struct DaEstimate {
    BitVec row;
    BitVec upper;            // AND of reliable correct profiles (tested skills must lie inside)
    BitVec lower_indicator;  // skills forced to 1 by reliable wrong profiles
    std::vector<std::uint32_t> removed_correct;  // positions filtered as unreliable
    std::vector<std::uint32_t> removed_wrong;
};

/// The DA machinery proper: filter unreliable profiles by iterated
/// max-conflict removal, then bound and assign each component. The row may
/// come out all-zero; da_solve applies the nonzero fix-up.
DaEstimate da_estimate(std::vector<BitVec> correct_profiles, std::vector<BitVec> wrong_profiles,
                       std::size_t skill_count, RandomSource& rng);

/// Re-estimates one question vector from the students who attempted it in
/// training (each side subsampled to da_sample_size when larger). Returns
/// nullopt when no profiled student attempted the question.
std::optional<BitVec> da_solve(std::size_t question,
                               const std::vector<std::optional<SkillProfile>>& profiles,
                               const ResponseMatrix& responses,
                               std::span<const CellRef> training_cells, std::size_t da_sample_size,
                               RandomSource& rng);

enum class SelectingGoal { Si, Sd, Em };

struct HbcaConfig {
    double eta = 0.85;
    int dim_lo = 5;
    int dim_hi = 9;
    int population_size = 100;
    int iterations = 100;
    int replace_count = 40;     // worst candidates replaced on stagnation
    double flip_prob = 0.2;
    double leaf_density = 0.35;
    std::size_t da_sample_size = 100;
    SelectingGoal selecting_goal = SelectingGoal::Sd;
    double validation_ratio = 0.2;  // used only when the split has no validation cells
    double smoothing = 0.0;
    EmConfig em;                    // for the EM selecting goal
    unsigned workers = 1;

    void validate() const;  // throws ConfigError
};

enum class CandidateOrigin { Qst, DaCalibrated };

struct CandidateQ {
    QMatrix q;
    double validation_mae = 1.0;
    int age = 0;  // iterations survived
    CandidateOrigin origin = CandidateOrigin::Qst;
};

struct IterationStats {
    int dim = 0;
    int iteration = 0;  // 0 is the QST initialisation round
    double best_so_far = 1.0;
    double round_best = 1.0;
    double round_median = 1.0;
    double round_worst = 1.0;
    int replaced = 0;
};

struct HbcaDimResult {
    int dim = 0;
    CandidateQ best;      // best snapshot ever seen at this dim
    CandidateQ best_qst;  // best of the initial population
    std::vector<IterationStats> iterations;
};

struct HbcaResult {
    CandidateQ best;  // across all dims
    int best_dim = 0;
    std::vector<HbcaDimResult> dims;
};

/// Population-based bidirectional calibration. Uses split.train for fitting
/// and split.validation for candidate selection (a validation_ratio share of
/// train is carved out when the split has none). The best candidate snapshot
/// is never lost, so best-so-far validation MAE is non-increasing.
HbcaResult hbca_run(const ResponseMatrix& responses, const DataSplit& split,
                    const HbcaConfig& config, RandomSource rng);

/// One JSON object per line: dim, iteration, best/median/worst validation
/// MAE, replacements made.
std::string hbca_report_jsonl(const HbcaResult& result);

}  // namespace cogdiag
