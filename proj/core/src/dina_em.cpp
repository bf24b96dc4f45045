#include "cogdiag/dina_em.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "cogdiag/error.hpp"
#include "cogdiag/parallel.hpp"

namespace cogdiag {

namespace {

constexpr double kRateFloor = 1e-6;
constexpr std::size_t kChunk = 32;  // fixed reduction granularity, so any worker count sums identically

double clamp_rate(double r) { return std::clamp(r, kRateFloor, 1.0 - kRateFloor); }

struct Observation {
    std::uint32_t question;
    std::uint8_t correct;
};

std::vector<std::vector<Observation>> group_by_student(const ResponseMatrix& responses,
                                                       std::span<const CellRef> cells) {
    std::vector<std::vector<Observation>> grouped(responses.student_count());
    for (const auto& cell : cells)
        grouped[cell.student].push_back(
            {cell.question,
             static_cast<std::uint8_t>(responses.at(cell.student, cell.question) == Cell::Correct)});
    return grouped;
}

/// log P(x | xi) for the four (xi, x) combinations of one question.
struct LogProb {
    double v[2][2];
};

std::vector<LogProb> log_probs(const std::vector<double>& slip, const std::vector<double>& guess) {
    std::vector<LogProb> lp(slip.size());
    for (std::size_t j = 0; j < slip.size(); ++j) {
        const double s = clamp_rate(slip[j]);
        const double g = clamp_rate(guess[j]);
        lp[j].v[1][1] = std::log(1.0 - s);
        lp[j].v[1][0] = std::log(s);
        lp[j].v[0][1] = std::log(g);
        lp[j].v[0][0] = std::log(1.0 - g);
    }
    return lp;
}

// ---------------------------------------------------------------------------
// Full 2^K latent-class model.
// ---------------------------------------------------------------------------

struct FullModel {
    std::size_t K = 0;
    std::size_t C = 0;                   // 2^K
    std::vector<std::uint32_t> qmask;    // per question, bitmask of tested skills

    std::uint8_t xi(std::size_t profile, std::size_t question) const {
        return (static_cast<std::uint32_t>(profile) & qmask[question]) == qmask[question];
    }
};

FullModel build_full_model(const QMatrix& q) {
    FullModel model;
    model.K = q.skill_count();
    model.C = std::size_t{1} << model.K;
    model.qmask.resize(q.question_count());
    for (std::size_t j = 0; j < q.question_count(); ++j) {
        std::uint32_t mask = 0;
        for (std::size_t k = 0; k < model.K; ++k)
            if (q.rows[j][k]) mask |= (1u << k);
        model.qmask[j] = mask;
    }
    return model;
}

/// Fills posterior[c] for one student and returns the log-evidence.
double student_posterior(const FullModel& model, const std::vector<Observation>& observations,
                         const std::vector<double>& log_prior, const std::vector<LogProb>& lp,
                         std::vector<double>& posterior) {
    double best = -INFINITY;
    for (std::size_t c = 0; c < model.C; ++c) {
        double value = log_prior[c];
        for (const auto& obs : observations) value += lp[obs.question].v[model.xi(c, obs.question)][obs.correct];
        posterior[c] = value;
        best = std::max(best, value);
    }
    if (!std::isfinite(best)) throw NumericalError("EM posterior collapsed to zero mass");
    double sum = 0;
    for (std::size_t c = 0; c < model.C; ++c) sum += std::exp(posterior[c] - best);
    const double log_evidence = best + std::log(sum);
    for (std::size_t c = 0; c < model.C; ++c) posterior[c] = std::exp(posterior[c] - log_evidence);
    return log_evidence;
}

struct FullTally {
    std::vector<double> prior;      // C
    std::vector<double> slip_num, slip_den, guess_num, guess_den;  // M
    double log_likelihood = 0;

    FullTally(std::size_t C, std::size_t M)
        : prior(C, 0), slip_num(M, 0), slip_den(M, 0), guess_num(M, 0), guess_den(M, 0) {}

    void merge(const FullTally& other) {
        for (std::size_t c = 0; c < prior.size(); ++c) prior[c] += other.prior[c];
        for (std::size_t j = 0; j < slip_num.size(); ++j) {
            slip_num[j] += other.slip_num[j];
            slip_den[j] += other.slip_den[j];
            guess_num[j] += other.guess_num[j];
            guess_den[j] += other.guess_den[j];
        }
        log_likelihood += other.log_likelihood;
    }
};

EmState fit_full(const FullModel& model, std::size_t M,
                 const std::vector<std::vector<Observation>>& students, const EmConfig& config,
                 double init_slip, double init_guess) {
    const std::size_t S = students.size();
    EmState state;
    state.skill_count = model.K;
    state.class_priors.assign(model.C, 1.0 / static_cast<double>(model.C));
    state.slip.assign(M, clamp_rate(init_slip));
    state.guess.assign(M, clamp_rate(init_guess));

    const std::size_t chunks = (S + kChunk - 1) / kChunk;
    double previous_ll = -INFINITY;
    for (int iter = 0; iter < config.max_iter; ++iter) {
        std::vector<double> log_prior(model.C);
        for (std::size_t c = 0; c < model.C; ++c) log_prior[c] = std::log(state.class_priors[c]);
        const auto lp = log_probs(state.slip, state.guess);

        std::vector<FullTally> partials(chunks, FullTally(model.C, M));
        parallel_for(chunks, config.workers, [&](std::size_t chunk) {
            std::vector<double> posterior(model.C);
            FullTally& tally = partials[chunk];
            const std::size_t begin = chunk * kChunk;
            const std::size_t end = std::min(S, begin + kChunk);
            for (std::size_t i = begin; i < end; ++i) {
                tally.log_likelihood += student_posterior(model, students[i], log_prior, lp, posterior);
                for (std::size_t c = 0; c < model.C; ++c) {
                    const double w = posterior[c];
                    tally.prior[c] += w;
                    if (w == 0) continue;
                    for (const auto& obs : students[i]) {
                        if (model.xi(c, obs.question)) {
                            tally.slip_den[obs.question] += w;
                            if (!obs.correct) tally.slip_num[obs.question] += w;
                        } else {
                            tally.guess_den[obs.question] += w;
                            if (obs.correct) tally.guess_num[obs.question] += w;
                        }
                    }
                }
            }
        });
        FullTally total(model.C, M);
        for (const auto& partial : partials) total.merge(partial);

        state.log_likelihood_trace.push_back(total.log_likelihood);

        for (std::size_t c = 0; c < model.C; ++c) total.prior[c] /= static_cast<double>(S);
        state.class_priors = total.prior;
        for (std::size_t j = 0; j < M; ++j) {
            if (total.slip_den[j] > 0) state.slip[j] = clamp_rate(total.slip_num[j] / total.slip_den[j]);
            if (total.guess_den[j] > 0) state.guess[j] = clamp_rate(total.guess_num[j] / total.guess_den[j]);
        }

        if (std::abs(total.log_likelihood - previous_ll) < config.tol) break;
        previous_ll = total.log_likelihood;
    }
    return state;
}

// ---------------------------------------------------------------------------
// Factorized model: every question tests exactly one skill, so each skill is
// an independent two-class mixture.
// ---------------------------------------------------------------------------

std::vector<std::size_t> question_skill(const QMatrix& q) {
    std::vector<std::size_t> skill(q.question_count());
    for (std::size_t j = 0; j < q.question_count(); ++j)
        for (std::size_t k = 0; k < q.skill_count(); ++k)
            if (q.rows[j][k]) skill[j] = k;
    return skill;
}

struct FactorTally {
    std::vector<double> prior;  // K
    std::vector<double> slip_num, slip_den, guess_num, guess_den;  // M
    double log_likelihood = 0;

    FactorTally(std::size_t K, std::size_t M)
        : prior(K, 0), slip_num(M, 0), slip_den(M, 0), guess_num(M, 0), guess_den(M, 0) {}

    void merge(const FactorTally& other) {
        for (std::size_t k = 0; k < prior.size(); ++k) prior[k] += other.prior[k];
        for (std::size_t j = 0; j < slip_num.size(); ++j) {
            slip_num[j] += other.slip_num[j];
            slip_den[j] += other.slip_den[j];
            guess_num[j] += other.guess_num[j];
            guess_den[j] += other.guess_den[j];
        }
        log_likelihood += other.log_likelihood;
    }
};

/// Two-class posterior P(skill mastered) for one (student, skill) pair.
double factor_posterior(const std::vector<Observation>& observations,
                        const std::vector<std::size_t>& skill, std::size_t k, double prior,
                        const std::vector<LogProb>& lp, double& log_evidence) {
    double l1 = std::log(prior);
    double l0 = std::log(1.0 - prior);
    for (const auto& obs : observations) {
        if (skill[obs.question] != k) continue;
        l1 += lp[obs.question].v[1][obs.correct];
        l0 += lp[obs.question].v[0][obs.correct];
    }
    const double m = std::max(l0, l1);
    log_evidence = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
    return std::exp(l1 - log_evidence);
}

EmState fit_factorized(const QMatrix& q, const std::vector<std::vector<Observation>>& students,
                       const EmConfig& config, double init_slip, double init_guess) {
    const std::size_t S = students.size();
    const std::size_t M = q.question_count();
    const std::size_t K = q.skill_count();
    const auto skill = question_skill(q);

    EmState state;
    state.factorized = true;
    state.skill_count = K;
    state.skill_priors.assign(K, 0.5);
    state.slip.assign(M, clamp_rate(init_slip));
    state.guess.assign(M, clamp_rate(init_guess));

    const std::size_t chunks = (S + kChunk - 1) / kChunk;
    double previous_ll = -INFINITY;
    for (int iter = 0; iter < config.max_iter; ++iter) {
        const auto lp = log_probs(state.slip, state.guess);

        std::vector<FactorTally> partials(chunks, FactorTally(K, M));
        parallel_for(chunks, config.workers, [&](std::size_t chunk) {
            FactorTally& tally = partials[chunk];
            const std::size_t begin = chunk * kChunk;
            const std::size_t end = std::min(S, begin + kChunk);
            for (std::size_t i = begin; i < end; ++i) {
                for (std::size_t k = 0; k < K; ++k) {
                    double log_evidence = 0;
                    const double p1 =
                        factor_posterior(students[i], skill, k, state.skill_priors[k], lp, log_evidence);
                    tally.log_likelihood += log_evidence;
                    tally.prior[k] += p1;
                    for (const auto& obs : students[i]) {
                        if (skill[obs.question] != k) continue;
                        tally.slip_den[obs.question] += p1;
                        if (!obs.correct) tally.slip_num[obs.question] += p1;
                        tally.guess_den[obs.question] += 1.0 - p1;
                        if (obs.correct) tally.guess_num[obs.question] += 1.0 - p1;
                    }
                }
            }
        });
        FactorTally total(K, M);
        for (const auto& partial : partials) total.merge(partial);

        state.log_likelihood_trace.push_back(total.log_likelihood);

        for (std::size_t k = 0; k < K; ++k)
            state.skill_priors[k] = std::clamp(total.prior[k] / static_cast<double>(S), kRateFloor,
                                               1.0 - kRateFloor);
        for (std::size_t j = 0; j < M; ++j) {
            if (total.slip_den[j] > 0) state.slip[j] = clamp_rate(total.slip_num[j] / total.slip_den[j]);
            if (total.guess_den[j] > 0) state.guess[j] = clamp_rate(total.guess_num[j] / total.guess_den[j]);
        }

        if (std::abs(total.log_likelihood - previous_ll) < config.tol) break;
        previous_ll = total.log_likelihood;
    }
    return state;
}

}  // namespace

bool factorizable(const QMatrix& q) {
    for (const auto& row : q.rows) {
        int tested = 0;
        for (auto b : row) tested += b;
        if (tested != 1) return false;
    }
    return true;
}

EmState em_fit(const ResponseMatrix& responses, const QMatrix& q,
               std::span<const CellRef> training_cells, const EmConfig& config, RandomSource rng) {
    if (config.max_iter < 1) throw ConfigError("em max_iter must be >= 1");
    const bool factorize = factorizable(q);
    if (!factorize && q.skill_count() > static_cast<std::size_t>(config.class_limit))
        throw ConfigError("DINA-EM enumerates 2^K classes and K=" + std::to_string(q.skill_count()) +
                          " exceeds the limit of " + std::to_string(config.class_limit) +
                          "; use the ESVE path for high-dimensional Q-matrices");

    const auto students = group_by_student(responses, training_cells);

    EmState best;
    double best_ll = -INFINITY;
    for (int restart = 0; restart < std::max(1, config.restarts); ++restart) {
        double init_slip = config.init_slip;
        double init_guess = config.init_guess;
        if (restart > 0) {
            RandomSource restart_rng = rng.derive(static_cast<std::uint64_t>(restart));
            init_slip = 0.05 + 0.4 * restart_rng.uniform01();
            init_guess = 0.05 + 0.4 * restart_rng.uniform01();
        }
        EmState state = factorize
                            ? fit_factorized(q, students, config, init_slip, init_guess)
                            : fit_full(build_full_model(q), q.question_count(), students, config,
                                       init_slip, init_guess);
        if (state.log_likelihood_trace.back() > best_ll) {
            best_ll = state.log_likelihood_trace.back();
            best = std::move(state);
        }
    }
    return best;
}

std::vector<double> em_predict(const EmState& state, const ResponseMatrix& responses,
                               const QMatrix& q, std::span<const CellRef> training_cells,
                               std::span<const CellRef> target_cells, unsigned workers) {
    const auto students = group_by_student(responses, training_cells);
    const auto lp = log_probs(state.slip, state.guess);

    std::vector<std::vector<CellRef>> targets_by_student(responses.student_count());
    for (std::size_t c = 0; c < target_cells.size(); ++c)
        targets_by_student[target_cells[c].student].push_back(target_cells[c]);
    // Map each (student, question) target back to its output slot.
    std::vector<double> out(target_cells.size(), 0.0);
    std::vector<std::vector<std::size_t>> slots(responses.student_count());
    for (std::size_t c = 0; c < target_cells.size(); ++c)
        slots[target_cells[c].student].push_back(c);

    if (state.factorized) {
        const auto skill = question_skill(q);
        parallel_for(responses.student_count(), workers, [&](std::size_t i) {
            if (slots[i].empty()) return;
            std::vector<double> mastered(state.skill_count);
            for (std::size_t k = 0; k < state.skill_count; ++k) {
                double log_evidence = 0;
                mastered[k] = factor_posterior(students[i], skill, k, state.skill_priors[k], lp,
                                               log_evidence);
            }
            for (std::size_t idx = 0; idx < slots[i].size(); ++idx) {
                const std::size_t c = slots[i][idx];
                const std::size_t jq = targets_by_student[i][idx].question;
                const double p1 = mastered[skill[jq]];
                out[c] = p1 * (1.0 - state.slip[jq]) + (1.0 - p1) * state.guess[jq];
            }
        });
        return out;
    }

    FullModel model = build_full_model(q);
    std::vector<double> log_prior(model.C);
    for (std::size_t c = 0; c < model.C; ++c) log_prior[c] = std::log(state.class_priors[c]);
    parallel_for(responses.student_count(), workers, [&](std::size_t i) {
        if (slots[i].empty()) return;
        std::vector<double> posterior(model.C);
        student_posterior(model, students[i], log_prior, lp, posterior);
        for (std::size_t idx = 0; idx < slots[i].size(); ++idx) {
            const std::size_t jq = targets_by_student[i][idx].question;
            double p = 0;
            for (std::size_t c = 0; c < model.C; ++c)
                p += posterior[c] *
                     (model.xi(c, jq) ? 1.0 - state.slip[jq] : state.guess[jq]);
            out[slots[i][idx]] = p;
        }
    });
    return out;
}

std::vector<std::optional<SkillProfile>> em_map_profiles(const EmState& state,
                                                         const ResponseMatrix& responses,
                                                         const QMatrix& q,
                                                         std::span<const CellRef> training_cells,
                                                         unsigned workers) {
    const auto students = group_by_student(responses, training_cells);
    const auto lp = log_probs(state.slip, state.guess);
    std::vector<std::optional<SkillProfile>> profiles(responses.student_count());

    if (state.factorized) {
        const auto skill = question_skill(q);
        parallel_for(responses.student_count(), workers, [&](std::size_t i) {
            if (students[i].empty()) return;
            SkillProfile profile;
            profile.bits.assign(state.skill_count, 0);
            profile.determined.assign(state.skill_count, 1);
            for (std::size_t k = 0; k < state.skill_count; ++k) {
                double log_evidence = 0;
                profile.bits[k] =
                    factor_posterior(students[i], skill, k, state.skill_priors[k], lp, log_evidence) >= 0.5;
            }
            profiles[i] = std::move(profile);
        });
        return profiles;
    }

    FullModel model = build_full_model(q);
    std::vector<double> log_prior(model.C);
    for (std::size_t c = 0; c < model.C; ++c) log_prior[c] = std::log(state.class_priors[c]);
    parallel_for(responses.student_count(), workers, [&](std::size_t i) {
        if (students[i].empty()) return;
        std::vector<double> posterior(model.C);
        student_posterior(model, students[i], log_prior, lp, posterior);
        std::size_t best = 0;
        for (std::size_t c = 1; c < model.C; ++c)
            if (posterior[c] > posterior[best]) best = c;
        SkillProfile profile;
        profile.bits.assign(state.skill_count, 0);
        profile.determined.assign(state.skill_count, 1);
        for (std::size_t k = 0; k < state.skill_count; ++k)
            profile.bits[k] = (best >> k) & 1u;
        profiles[i] = std::move(profile);
    });
    return profiles;
}

std::string em_state_json(const EmState& state, const QMatrix& q) {
    nlohmann::json doc;
    doc["factorized"] = state.factorized;
    doc["skill_count"] = state.skill_count;
    if (state.factorized)
        doc["skill_priors"] = state.skill_priors;
    else
        doc["class_priors"] = state.class_priors;
    auto& questions = doc["questions"];
    questions = nlohmann::json::array();
    for (std::size_t j = 0; j < q.question_count(); ++j) {
        questions.push_back({{"question_id", q.question_ids[j]},
                             {"slip", state.slip[j]},
                             {"guess", state.guess[j]}});
    }
    doc["log_likelihood_trace"] = state.log_likelihood_trace;
    return doc.dump(2) + "\n";
}

}  // namespace cogdiag
