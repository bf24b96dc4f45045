#include "cogdiag/hbca.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "cogdiag/dataset.hpp"
#include "cogdiag/error.hpp"
#include "cogdiag/esve.hpp"
#include "cogdiag/metrics.hpp"
#include "cogdiag/parallel.hpp"
#include "cogdiag/predict.hpp"

namespace cogdiag {

CoveringGraph build_covering_graph(const ResponseMatrix& responses,
                                   std::span<const CellRef> training_cells, double eta) {
    if (eta <= 0 || eta >= 1) throw ConfigError("eta must lie in (0,1)");

    const std::size_t M = responses.question_count();
    CoveringGraph graph;
    graph.question_count = M;
    graph.question_ids = responses.question_ids();
    graph.beta.assign(M * M, 0.0);
    graph.beta_defined.assign(M * M, 0);
    graph.children.assign(M, {});
    graph.parent_count.assign(M, 0);

    std::vector<std::vector<std::pair<std::uint32_t, std::uint8_t>>> by_student(
        responses.student_count());
    for (const auto& cell : training_cells)
        by_student[cell.student].push_back(
            {cell.question,
             static_cast<std::uint8_t>(responses.at(cell.student, cell.question) == Cell::Correct)});

    std::vector<std::uint32_t> num(M * M, 0), den(M * M, 0);
    for (const auto& observations : by_student) {
        for (const auto& [w, w_correct] : observations) {
            if (!w_correct) continue;
            for (const auto& [z, z_correct] : observations) {
                if (w == z) continue;
                ++den[w * M + z];
                if (z_correct) ++num[w * M + z];
            }
        }
    }
    for (std::size_t w = 0; w < M; ++w) {
        for (std::size_t z = 0; z < M; ++z) {
            if (w == z || den[w * M + z] == 0) continue;
            const double beta = static_cast<double>(num[w * M + z]) / den[w * M + z];
            graph.beta[w * M + z] = beta;
            graph.beta_defined[w * M + z] = 1;
            if (beta >= eta) {
                graph.edges.emplace_back(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(z));
                graph.children[w].push_back(static_cast<std::uint32_t>(z));
                ++graph.parent_count[z];
            }
        }
    }
    return graph;
}

QMatrix qst_init(const CoveringGraph& graph, int dim_qv, double flip_prob, double leaf_density,
                 RandomSource& rng) {
    if (dim_qv < 1) throw ConfigError("dim_qv must be >= 1");
    const std::size_t M = graph.question_count;
    const std::size_t K = static_cast<std::size_t>(dim_qv);

    // Easy to difficult: more parents means an easier question.
    std::vector<std::size_t> order(M);
    for (std::size_t j = 0; j < M; ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return graph.parent_count[a] > graph.parent_count[b];
    });

    std::vector<BitVec> rows(M);
    std::vector<std::uint8_t> assigned(M, 0);
    for (std::size_t w : order) {
        BitVec row(K, 0);
        bool has_assigned_child = false;
        for (auto z : graph.children[w]) {
            if (!assigned[z]) continue;
            has_assigned_child = true;
            for (std::size_t k = 0; k < K; ++k) row[k] |= rows[z][k];
        }
        if (has_assigned_child) {
            for (std::size_t k = 0; k < K; ++k)
                if (!row[k] && rng.bernoulli(flip_prob)) row[k] = 1;
        } else {
            do {
                for (std::size_t k = 0; k < K; ++k) row[k] = rng.bernoulli(leaf_density);
            } while (all_zero(row));
        }
        rows[w] = std::move(row);
        assigned[w] = 1;
    }

    return make_qmatrix(std::move(rows), graph.question_ids, synthetic_skill_ids(K));
}

bool da_conflict_condition(const BitVec& correct_profile, const BitVec& wrong_profile) {
    if (correct_profile.size() != wrong_profile.size())
        throw ValidationError("da_conflict_condition: profile length mismatch");
    return dominates(wrong_profile, correct_profile);
}

DaEstimate da_estimate(std::vector<BitVec> correct_profiles, std::vector<BitVec> wrong_profiles,
                       std::size_t skill_count, RandomSource& rng) {
    std::vector<std::uint32_t> correct_pos(correct_profiles.size());
    std::vector<std::uint32_t> wrong_pos(wrong_profiles.size());
    for (std::uint32_t i = 0; i < correct_pos.size(); ++i) correct_pos[i] = i;
    for (std::uint32_t i = 0; i < wrong_pos.size(); ++i) wrong_pos[i] = i;

    DaEstimate estimate;
    for (;;) {
        std::vector<std::uint32_t> correct_degree(correct_profiles.size(), 0);
        std::vector<std::uint32_t> wrong_degree(wrong_profiles.size(), 0);
        bool any = false;
        for (std::uint32_t a = 0; a < correct_profiles.size(); ++a) {
            for (std::uint32_t b = 0; b < wrong_profiles.size(); ++b) {
                if (da_conflict_condition(correct_profiles[a], wrong_profiles[b])) {
                    ++correct_degree[a];
                    ++wrong_degree[b];
                    any = true;
                }
            }
        }
        if (!any) break;

        std::uint32_t max_degree = 0;
        for (auto d : correct_degree) max_degree = std::max(max_degree, d);
        for (auto d : wrong_degree) max_degree = std::max(max_degree, d);

        std::vector<BitVec> kept_correct, kept_wrong;
        std::vector<std::uint32_t> kept_correct_pos, kept_wrong_pos;
        for (std::uint32_t a = 0; a < correct_profiles.size(); ++a) {
            if (correct_degree[a] == max_degree) {
                estimate.removed_correct.push_back(correct_pos[a]);
            } else {
                kept_correct.push_back(std::move(correct_profiles[a]));
                kept_correct_pos.push_back(correct_pos[a]);
            }
        }
        for (std::uint32_t b = 0; b < wrong_profiles.size(); ++b) {
            if (wrong_degree[b] == max_degree) {
                estimate.removed_wrong.push_back(wrong_pos[b]);
            } else {
                kept_wrong.push_back(std::move(wrong_profiles[b]));
                kept_wrong_pos.push_back(wrong_pos[b]);
            }
        }
        correct_profiles = std::move(kept_correct);
        wrong_profiles = std::move(kept_wrong);
        correct_pos = std::move(kept_correct_pos);
        wrong_pos = std::move(kept_wrong_pos);
    }
    std::sort(estimate.removed_correct.begin(), estimate.removed_correct.end());
    std::sort(estimate.removed_wrong.begin(), estimate.removed_wrong.end());

    // A tested skill must be mastered by every reliable solver; a reliable
    // failure forces some still-permitted skill into the row.
    estimate.upper.assign(skill_count, 1);
    for (const auto& profile : correct_profiles)
        for (std::size_t k = 0; k < skill_count; ++k) estimate.upper[k] &= profile[k];
    estimate.lower_indicator.assign(skill_count, 0);
    for (const auto& profile : wrong_profiles)
        for (std::size_t k = 0; k < skill_count; ++k)
            if (!profile[k] && estimate.upper[k]) estimate.lower_indicator[k] = 1;

    estimate.row.assign(skill_count, 0);
    for (std::size_t k = 0; k < skill_count; ++k) {
        if (!estimate.upper[k]) {
            estimate.row[k] = 0;
        } else if (estimate.lower_indicator[k]) {
            estimate.row[k] = 1;
        } else {
            // Complemented so that a DA stream mirrors an ESVE stream with
            // the same seed under the bit-complement duality.
            estimate.row[k] = rng.bit() ^ 1;
        }
    }
    return estimate;
}

std::optional<BitVec> da_solve(std::size_t question,
                               const std::vector<std::optional<SkillProfile>>& profiles,
                               const ResponseMatrix& responses,
                               std::span<const CellRef> training_cells, std::size_t da_sample_size,
                               RandomSource& rng) {
    if (da_sample_size < 1) throw ConfigError("da_sample_size must be >= 1");
    std::vector<BitVec> correct_profiles, wrong_profiles;
    std::size_t skill_count = 0;
    for (const auto& cell : training_cells) {
        if (cell.question != question || !profiles[cell.student]) continue;
        const auto& bits = profiles[cell.student]->bits;
        skill_count = bits.size();
        if (responses.at(cell.student, cell.question) == Cell::Correct)
            correct_profiles.push_back(bits);
        else
            wrong_profiles.push_back(bits);
    }
    if (correct_profiles.empty() && wrong_profiles.empty()) return std::nullopt;

    auto subsample = [&](std::vector<BitVec>& side) {
        if (side.size() <= da_sample_size) return;
        const auto keep = sample_indices(side.size(), da_sample_size, rng);
        std::vector<BitVec> sampled;
        sampled.reserve(keep.size());
        for (auto idx : keep) sampled.push_back(std::move(side[idx]));
        side = std::move(sampled);
    };
    subsample(correct_profiles);
    subsample(wrong_profiles);

    DaEstimate estimate =
        da_estimate(std::move(correct_profiles), std::move(wrong_profiles), skill_count, rng);
    BitVec row = std::move(estimate.row);
    if (all_zero(row)) {
        // An all-zero row implies lower_indicator was all-zero, i.e. every
        // permitted skill is mastered by every reliable failing student, so
        // the wrong-coverage tie-break degenerates to the lowest permitted
        // index. With no permitted skill at all, fall back to one random bit.
        std::size_t permitted = skill_count;
        for (std::size_t k = 0; k < skill_count; ++k) {
            if (estimate.upper[k]) {
                permitted = k;
                break;
            }
        }
        if (permitted < skill_count)
            row[permitted] = 1;
        else
            row[rng.below(skill_count)] = 1;
    }
    return row;
}

void HbcaConfig::validate() const {
    if (eta <= 0 || eta >= 1) throw ConfigError("eta must lie in (0,1)");
    if (dim_lo < 1 || dim_hi < dim_lo) throw ConfigError("dim range must satisfy 1 <= lo <= hi");
    if (population_size < 1) throw ConfigError("population_size must be >= 1");
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (replace_count < 0 || replace_count > population_size)
        throw ConfigError("replace_count must lie in [0, population_size]");
    if (flip_prob < 0 || flip_prob >= 1) throw ConfigError("flip_prob must lie in [0,1)");
    if (leaf_density <= 0 || leaf_density >= 1) throw ConfigError("leaf_density must lie in (0,1)");
    if (da_sample_size < 1) throw ConfigError("da_sample_size must be >= 1");
    if (validation_ratio <= 0 || validation_ratio >= 1)
        throw ConfigError("validation_ratio must lie in (0,1)");
}

namespace {

/// Fits the selecting-goal model on train and scores MAE on validation.
double evaluate_candidate(const QMatrix& q, const ResponseMatrix& responses,
                          std::span<const CellRef> train, std::span<const CellRef> validation,
                          const std::vector<std::uint8_t>& validation_truth,
                          const HbcaConfig& config, RandomSource rng) {
    std::vector<double> probabilities;
    if (config.selecting_goal == SelectingGoal::Em) {
        const EmState state = em_fit(responses, q, train, config.em, rng.derive(0));
        probabilities = em_predict(state, responses, q, train, validation);
    } else {
        const auto results = esve_solve_all(responses, q, train, rng.derive(0));
        const SlipGuessTable table =
            config.selecting_goal == SelectingGoal::Sd
                ? estimate_sd(results, responses, q, train, config.smoothing)
                : estimate_si(results, responses, q, train, config.smoothing);
        probabilities = predict_all(extract_profiles(results), q, table, validation).probability;
    }
    return mae(probabilities, validation_truth);
}

struct RoundSummary {
    double best = 1.0;
    double median = 1.0;
    double worst = 1.0;
    std::size_t best_index = 0;
};

RoundSummary summarize(const std::vector<CandidateQ>& population) {
    std::vector<double> maes;
    maes.reserve(population.size());
    for (const auto& candidate : population) maes.push_back(candidate.validation_mae);
    RoundSummary summary;
    summary.best_index = 0;
    for (std::size_t c = 1; c < population.size(); ++c)
        if (maes[c] < maes[summary.best_index]) summary.best_index = c;
    summary.best = maes[summary.best_index];
    std::vector<double> sorted = maes;
    std::sort(sorted.begin(), sorted.end());
    summary.median = sorted[sorted.size() / 2];
    summary.worst = sorted.back();
    return summary;
}

}  // namespace

HbcaResult hbca_run(const ResponseMatrix& responses, const DataSplit& split,
                    const HbcaConfig& config, RandomSource rng) {
    config.validate();

    std::vector<CellRef> train = split.train;
    std::vector<CellRef> validation = split.validation;
    if (validation.empty()) {
        // Carve the validation share out of train, fixed once per run.
        std::vector<CellRef> shuffled = train;
        RandomSource carve_rng = rng.derive(0xCA57);
        carve_rng.shuffle(shuffled);
        const std::size_t n_val = static_cast<std::size_t>(
            std::llround(config.validation_ratio * static_cast<double>(shuffled.size())));
        if (n_val == 0 || n_val >= shuffled.size())
            throw ValidationError("training set too small to carve a validation share");
        validation.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
        train.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_val), shuffled.end());
        std::sort(validation.begin(), validation.end());
        std::sort(train.begin(), train.end());
    }
    if (train.empty() || validation.empty())
        throw ValidationError("hbca_run requires nonempty train and validation cell sets");

    const auto validation_truth = observed_truth(responses, validation);
    const CoveringGraph graph = build_covering_graph(responses, train, config.eta);
    const std::size_t population_size = static_cast<std::size_t>(config.population_size);

    HbcaResult result;
    bool have_best = false;

    for (int dim = config.dim_lo; dim <= config.dim_hi; ++dim) {
        RandomSource dim_rng = rng.derive(0x100 + static_cast<std::uint64_t>(dim));
        std::uint64_t stream = 0;

        HbcaDimResult dim_result;
        dim_result.dim = dim;

        std::vector<CandidateQ> population(population_size);
        std::vector<std::uint64_t> candidate_stream(population_size);
        for (std::size_t c = 0; c < population_size; ++c) {
            RandomSource init_rng = dim_rng.derive(stream++);
            population[c].q = qst_init(graph, dim, config.flip_prob, config.leaf_density, init_rng);
            candidate_stream[c] = stream++;
        }
        parallel_for(population_size, config.workers, [&](std::size_t c) {
            population[c].validation_mae =
                evaluate_candidate(population[c].q, responses, train, validation, validation_truth,
                                   config, dim_rng.derive(candidate_stream[c]));
        });

        RoundSummary summary = summarize(population);
        dim_result.best_qst = population[summary.best_index];
        dim_result.best = population[summary.best_index];
        double best_so_far = summary.best;
        dim_result.iterations.push_back(
            {dim, 0, best_so_far, summary.best, summary.median, summary.worst, 0});

        for (int iteration = 1; iteration <= config.iterations; ++iteration) {
            for (std::size_t c = 0; c < population_size; ++c) candidate_stream[c] = stream++;
            parallel_for(population_size, config.workers, [&](std::size_t c) {
                CandidateQ& candidate = population[c];
                RandomSource cand_rng = dim_rng.derive(candidate_stream[c]);

                // One ESVE -> DA pass, then refit the selecting goal.
                const auto results =
                    esve_solve_all(responses, candidate.q, train, cand_rng.derive(0));
                const auto profiles = extract_profiles(results);
                for (std::size_t j = 0; j < candidate.q.question_count(); ++j) {
                    RandomSource da_rng = cand_rng.derive(1 + j);
                    if (auto row = da_solve(j, profiles, responses, train, config.da_sample_size,
                                            da_rng))
                        candidate.q.rows[j] = std::move(*row);
                }
                candidate.origin = CandidateOrigin::DaCalibrated;
                candidate.age += 1;
                candidate.validation_mae =
                    evaluate_candidate(candidate.q, responses, train, validation, validation_truth,
                                       config, cand_rng.derive(1 + candidate.q.question_count()));
            });

            summary = summarize(population);
            const bool improved = summary.best < best_so_far;
            if (improved) {
                best_so_far = summary.best;
                dim_result.best = population[summary.best_index];
            }

            int replaced = 0;
            if (!improved && config.replace_count > 0) {
                // Replace the worst candidates with fresh initialisations;
                // the round's best stays (elitism).
                std::vector<std::size_t> ranked(population_size);
                for (std::size_t c = 0; c < population_size; ++c) ranked[c] = c;
                std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
                    return population[a].validation_mae < population[b].validation_mae;
                });
                const std::size_t replace = std::min<std::size_t>(
                    static_cast<std::size_t>(config.replace_count), population_size - 1);
                std::vector<std::size_t> slots(ranked.end() - static_cast<std::ptrdiff_t>(replace),
                                               ranked.end());
                std::vector<std::uint64_t> init_stream(slots.size()), eval_stream(slots.size());
                for (std::size_t s = 0; s < slots.size(); ++s) {
                    init_stream[s] = stream++;
                    eval_stream[s] = stream++;
                }
                parallel_for(slots.size(), config.workers, [&](std::size_t s) {
                    CandidateQ fresh;
                    RandomSource init_rng = dim_rng.derive(init_stream[s]);
                    fresh.q = qst_init(graph, dim, config.flip_prob, config.leaf_density, init_rng);
                    fresh.validation_mae =
                        evaluate_candidate(fresh.q, responses, train, validation, validation_truth,
                                           config, dim_rng.derive(eval_stream[s]));
                    population[slots[s]] = std::move(fresh);
                });
                replaced = static_cast<int>(slots.size());
                summary = summarize(population);
                if (summary.best < best_so_far) {
                    best_so_far = summary.best;
                    dim_result.best = population[summary.best_index];
                }
            }

            dim_result.iterations.push_back({dim, iteration, best_so_far, summary.best,
                                             summary.median, summary.worst, replaced});
        }

        if (!have_best || dim_result.best.validation_mae < result.best.validation_mae) {
            result.best = dim_result.best;
            result.best_dim = dim;
            have_best = true;
        }
        result.dims.push_back(std::move(dim_result));
    }
    return result;
}

std::string hbca_report_jsonl(const HbcaResult& result) {
    std::string out;
    for (const auto& dim : result.dims) {
        for (const auto& stats : dim.iterations) {
            nlohmann::json line;
            line["dim"] = stats.dim;
            line["iteration"] = stats.iteration;
            line["best_so_far"] = stats.best_so_far;
            line["round_best"] = stats.round_best;
            line["round_median"] = stats.round_median;
            line["round_worst"] = stats.round_worst;
            line["replaced"] = stats.replaced;
            out += line.dump();
            out += '\n';
        }
    }
    return out;
}

}  // namespace cogdiag
