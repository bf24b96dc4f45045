#pragma once

#include <optional>
#include <span>
#include <utility>

#include "cogdiag/random.hpp"
#include "cogdiag/types.hpp"

namespace cogdiag {

/// One attempted question together with its tested-skill vector.
struct LabeledQuestion {
    std::uint32_t question = 0;
    BitVec vector;
};

/// A student's attempted questions split by answer result.
struct LabeledQuestionSets {
    std::vector<LabeledQuestion> right;  // answered correctly
    std::vector<LabeledQuestion> wrong;  // answered incorrectly
};

struct ConflictReport {
    std::vector<std::uint32_t> right_degree;  // aligned with sets.right
    std::vector<std::uint32_t> wrong_degree;  // aligned with sets.wrong
    std::vector<std::pair<std::uint32_t, std::uint32_t>> conflicting_pairs;  // positions

    bool any() const { return !conflicting_pairs.empty(); }
};

/// Componentwise skill bounds. lower[k]=1 forces mastery; upper_indicator[k]=1
/// forces non-mastery. The two never hold together for the same k.
struct ComponentBounds {
    BitVec lower;
    BitVec upper_indicator;
};

struct FilterOutcome {
    LabeledQuestionSets reliable;
    std::vector<std::uint32_t> removed_right;  // question indices
    std::vector<std::uint32_t> removed_wrong;
    std::size_t rounds = 0;
};

struct EsveResult {
    SkillProfile profile;
    ComponentBounds bounds;
    std::vector<std::uint32_t> filtered_from_right;          // treated as guessed
    std::vector<std::uint32_t> filtered_from_wrong;          // treated as slipped
    std::vector<std::uint32_t> residual_inconsistent_wrong;  // reliable wrong, yet covered by the profile
};

/// Splits the student's observed training questions into right/wrong sets.
/// Throws ValidationError when the student has no observed training cell.
LabeledQuestionSets partition_questions(std::size_t student, const ResponseMatrix& responses,
                                        const QMatrix& q, std::span<const CellRef> training_cells);

/// True iff right_vec dominates wrong_vec componentwise; such a pair cannot
/// occur without a slip or a guess.
bool conflict_condition(const BitVec& right_vec, const BitVec& wrong_vec);

/// Tests every right x wrong pair; a conflicting pair increments both
/// members' degrees.
ConflictReport detect_conflicts(const LabeledQuestionSets& sets);

/// Repeatedly removes every question attaining the round's maximum conflict
/// degree (from either side) until no conflict remains.
FilterOutcome filter_unreliable(LabeledQuestionSets sets);

/// lower = componentwise OR of the reliable right vectors. upper_indicator
/// marks every skill that appears in some reliable wrong vector above lower
/// (the worst combination of candidate lacking skills).
ComponentBounds estimate_bounds(const LabeledQuestionSets& reliable, std::size_t skill_count);

/// bits[k] = 0 where forced below, 1 where forced above, otherwise a fair
/// coin; determined marks the forced components.
SkillProfile assign_profile(const ComponentBounds& bounds, RandomSource& rng);

/// Full per-student pipeline: partition, filter, bound, assign.
EsveResult esve_solve(std::size_t student, const ResponseMatrix& responses, const QMatrix& q,
                      std::span<const CellRef> training_cells, RandomSource& rng);

/// Solves every student independently (worker count does not change the
/// result; per-student randomness is derived from base_rng and the student
/// index). Students without observed training cells yield nullopt.
std::vector<std::optional<EsveResult>> esve_solve_all(const ResponseMatrix& responses,
                                                      const QMatrix& q,
                                                      std::span<const CellRef> training_cells,
                                                      const RandomSource& base_rng,
                                                      unsigned workers = 1);

/// Profile CSV (`student_id,<skill bits>,<determined mask>`) and a JSON
/// document with per-student filtered-question sets for audit.
std::string profiles_csv(const std::vector<std::optional<EsveResult>>& results,
                         const ResponseMatrix& responses, const QMatrix& q);
std::string profiles_csv(const std::vector<std::optional<SkillProfile>>& profiles,
                         const ResponseMatrix& responses,
                         const std::vector<std::string>& skill_ids);
std::string profiles_json(const std::vector<std::optional<EsveResult>>& results,
                          const ResponseMatrix& responses, const QMatrix& q);

}  // namespace cogdiag
