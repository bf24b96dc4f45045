#include "cogdiag/esve.hpp"

#include <algorithm>
#include <cassert>

#include <nlohmann/json.hpp>

#include "cogdiag/error.hpp"
#include "cogdiag/parallel.hpp"

namespace cogdiag {

LabeledQuestionSets partition_questions(std::size_t student, const ResponseMatrix& responses,
                                        const QMatrix& q, std::span<const CellRef> training_cells) {
    LabeledQuestionSets sets;
    for (const auto& cell : training_cells) {
        if (cell.student != student) continue;
        const Cell value = responses.at(cell.student, cell.question);
        if (value == Cell::Unobserved) continue;
        LabeledQuestion labeled{cell.question, q.rows[cell.question]};
        if (value == Cell::Correct)
            sets.right.push_back(std::move(labeled));
        else
            sets.wrong.push_back(std::move(labeled));
    }
    if (sets.right.empty() && sets.wrong.empty())
        throw ValidationError("student " + responses.student_ids()[student] +
                              " has no observed training cells");
    return sets;
}

bool conflict_condition(const BitVec& right_vec, const BitVec& wrong_vec) {
    if (right_vec.size() != wrong_vec.size())
        throw ValidationError("conflict_condition: question vector length mismatch");
    return dominates(right_vec, wrong_vec);
}

ConflictReport detect_conflicts(const LabeledQuestionSets& sets) {
    ConflictReport report;
    report.right_degree.assign(sets.right.size(), 0);
    report.wrong_degree.assign(sets.wrong.size(), 0);
    for (std::uint32_t p = 0; p < sets.right.size(); ++p) {
        for (std::uint32_t w = 0; w < sets.wrong.size(); ++w) {
            if (conflict_condition(sets.right[p].vector, sets.wrong[w].vector)) {
                ++report.right_degree[p];
                ++report.wrong_degree[w];
                report.conflicting_pairs.emplace_back(p, w);
            }
        }
    }
    return report;
}

FilterOutcome filter_unreliable(LabeledQuestionSets sets) {
    FilterOutcome outcome;
    for (;;) {
        const ConflictReport report = detect_conflicts(sets);
        if (!report.any()) break;
        ++outcome.rounds;

        std::uint32_t max_degree = 0;
        for (auto d : report.right_degree) max_degree = std::max(max_degree, d);
        for (auto d : report.wrong_degree) max_degree = std::max(max_degree, d);

        LabeledQuestionSets kept;
        for (std::uint32_t p = 0; p < sets.right.size(); ++p) {
            if (report.right_degree[p] == max_degree)
                outcome.removed_right.push_back(sets.right[p].question);
            else
                kept.right.push_back(std::move(sets.right[p]));
        }
        for (std::uint32_t w = 0; w < sets.wrong.size(); ++w) {
            if (report.wrong_degree[w] == max_degree)
                outcome.removed_wrong.push_back(sets.wrong[w].question);
            else
                kept.wrong.push_back(std::move(sets.wrong[w]));
        }
        sets = std::move(kept);
    }
    std::sort(outcome.removed_right.begin(), outcome.removed_right.end());
    std::sort(outcome.removed_wrong.begin(), outcome.removed_wrong.end());
    outcome.reliable = std::move(sets);
    return outcome;
}

ComponentBounds estimate_bounds(const LabeledQuestionSets& reliable, std::size_t skill_count) {
    ComponentBounds bounds;
    bounds.lower.assign(skill_count, 0);
    bounds.upper_indicator.assign(skill_count, 0);
    for (const auto& right : reliable.right)
        for (std::size_t k = 0; k < skill_count; ++k)
            bounds.lower[k] |= right.vector[k];
    for (const auto& wrong : reliable.wrong)
        for (std::size_t k = 0; k < skill_count; ++k)
            if (wrong.vector[k] && !bounds.lower[k]) bounds.upper_indicator[k] = 1;
    return bounds;
}

SkillProfile assign_profile(const ComponentBounds& bounds, RandomSource& rng) {
    const std::size_t K = bounds.lower.size();
    SkillProfile profile;
    profile.bits.assign(K, 0);
    profile.determined.assign(K, 0);
    for (std::size_t k = 0; k < K; ++k) {
        assert(!(bounds.lower[k] && bounds.upper_indicator[k]));
        if (bounds.upper_indicator[k]) {
            profile.bits[k] = 0;
            profile.determined[k] = 1;
        } else if (bounds.lower[k]) {
            profile.bits[k] = 1;
            profile.determined[k] = 1;
        } else {
            profile.bits[k] = rng.bit();
        }
    }
    return profile;
}

EsveResult esve_solve(std::size_t student, const ResponseMatrix& responses, const QMatrix& q,
                      std::span<const CellRef> training_cells, RandomSource& rng) {
    auto sets = partition_questions(student, responses, q, training_cells);
    auto filtered = filter_unreliable(std::move(sets));

    EsveResult result;
    result.bounds = estimate_bounds(filtered.reliable, q.skill_count());
    result.profile = assign_profile(result.bounds, rng);
    result.filtered_from_right = std::move(filtered.removed_right);
    result.filtered_from_wrong = std::move(filtered.removed_wrong);

    // A reliable wrong question can sit entirely inside the union of right
    // vectors; pairwise conflict detection cannot catch that, so it ends up
    // covered by the profile and is booked as a slip.
    for (const auto& wrong : filtered.reliable.wrong)
        if (dominates(result.bounds.lower, wrong.vector))
            result.residual_inconsistent_wrong.push_back(wrong.question);
    std::sort(result.residual_inconsistent_wrong.begin(), result.residual_inconsistent_wrong.end());
    return result;
}

std::vector<std::optional<EsveResult>> esve_solve_all(const ResponseMatrix& responses,
                                                      const QMatrix& q,
                                                      std::span<const CellRef> training_cells,
                                                      const RandomSource& base_rng,
                                                      unsigned workers) {
    const std::size_t S = responses.student_count();
    std::vector<std::vector<CellRef>> by_student(S);
    for (const auto& cell : training_cells) by_student[cell.student].push_back(cell);

    std::vector<std::optional<EsveResult>> results(S);
    parallel_for(S, workers, [&](std::size_t i) {
        if (by_student[i].empty()) return;
        RandomSource rng = base_rng.derive(i);
        results[i] = esve_solve(i, responses, q, by_student[i], rng);
    });
    return results;
}

namespace {

std::string bits_to_string(const BitVec& bits) {
    std::string text;
    for (auto b : bits) text += b ? '1' : '0';
    return text;
}

}  // namespace

std::string profiles_csv(const std::vector<std::optional<SkillProfile>>& profiles,
                         const ResponseMatrix& responses,
                         const std::vector<std::string>& skill_ids) {
    std::string csv = "student_id";
    for (const auto& id : skill_ids) csv += "," + id;
    for (const auto& id : skill_ids) csv += "," + id + "_det";
    csv += '\n';
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        if (!profiles[i]) continue;
        csv += responses.student_ids()[i];
        for (auto b : profiles[i]->bits) csv += b ? ",1" : ",0";
        for (auto b : profiles[i]->determined) csv += b ? ",1" : ",0";
        csv += '\n';
    }
    return csv;
}

std::string profiles_csv(const std::vector<std::optional<EsveResult>>& results,
                         const ResponseMatrix& responses, const QMatrix& q) {
    std::vector<std::optional<SkillProfile>> profiles(results.size());
    for (std::size_t i = 0; i < results.size(); ++i)
        if (results[i]) profiles[i] = results[i]->profile;
    return profiles_csv(profiles, responses, q.skill_ids);
}

std::string profiles_json(const std::vector<std::optional<EsveResult>>& results,
                          const ResponseMatrix& responses, const QMatrix& q) {
    nlohmann::json doc;
    doc["skills"] = q.skill_ids;
    auto& students = doc["students"];
    students = nlohmann::json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i]) continue;
        const auto& r = *results[i];
        nlohmann::json entry;
        entry["student_id"] = responses.student_ids()[i];
        entry["bits"] = bits_to_string(r.profile.bits);
        entry["determined"] = bits_to_string(r.profile.determined);
        entry["level"] = r.profile.level();
        auto names = [&](const std::vector<std::uint32_t>& questions) {
            std::vector<std::string> ids;
            for (auto j : questions) ids.push_back(q.question_ids[j]);
            return ids;
        };
        entry["filtered_from_right"] = names(r.filtered_from_right);
        entry["filtered_from_wrong"] = names(r.filtered_from_wrong);
        entry["residual_inconsistent_wrong"] = names(r.residual_inconsistent_wrong);
        students.push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

}  // namespace cogdiag
