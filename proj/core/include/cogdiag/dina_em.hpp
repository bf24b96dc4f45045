#pragma once

#include <optional>
#include <span>
#include <string>

#include "cogdiag/random.hpp"
#include "cogdiag/types.hpp"

namespace cogdiag {

struct EmConfig {
    int max_iter = 500;
    double tol = 1e-6;  // absolute log-likelihood change
    double init_slip = 0.2;
    double init_guess = 0.2;
    int restarts = 1;     // restarts > 1 perturb the rate initialisation
    int class_limit = 15; // largest K enumerated as 2^K classes
    unsigned workers = 1;
};

/// Fitted latent-class state. The full model enumerates all 2^K profiles;
/// when every question tests exactly one skill the classes factorise into K
/// independent two-class problems (skill_priors) and K is unrestricted.
struct EmState {
    bool factorized = false;
    std::size_t skill_count = 0;
    std::vector<double> class_priors;   // full mode: 2^K entries, profile c = bits of c
    std::vector<double> skill_priors;   // factorized mode: P(skill k mastered)
    std::vector<double> slip;           // per question
    std::vector<double> guess;
    std::vector<double> log_likelihood_trace;
};

/// True iff every Q row tests exactly one skill.
bool factorizable(const QMatrix& q);

/// Classic EM fit on the observed training cells. Throws ConfigError when
/// 2^K enumeration is infeasible and the Q-matrix does not factorise
/// (use the ESVE path for such data).
EmState em_fit(const ResponseMatrix& responses, const QMatrix& q,
               std::span<const CellRef> training_cells, const EmConfig& config, RandomSource rng);

/// Posterior-predictive P(correct) per target cell. Students with no
/// training cells fall back to the prior-weighted prediction.
std::vector<double> em_predict(const EmState& state, const ResponseMatrix& responses,
                               const QMatrix& q, std::span<const CellRef> training_cells,
                               std::span<const CellRef> target_cells, unsigned workers = 1);

/// Per-student MAP profile under the fitted posterior.
std::vector<std::optional<SkillProfile>> em_map_profiles(const EmState& state,
                                                         const ResponseMatrix& responses,
                                                         const QMatrix& q,
                                                         std::span<const CellRef> training_cells,
                                                         unsigned workers = 1);

std::string em_state_json(const EmState& state, const QMatrix& q);

}  // namespace cogdiag
