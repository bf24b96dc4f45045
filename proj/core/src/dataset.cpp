#include "cogdiag/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "cogdiag/error.hpp"

namespace cogdiag {

ResponseMatrix filter_assist_subset(const ResponseMatrix& raw, double min_question_freq,
                                    double min_student_freq) {
    if (min_question_freq < 0 || min_question_freq > 1 || min_student_freq < 0 || min_student_freq > 1)
        throw ConfigError("frequency thresholds must lie in [0,1]");

    const std::size_t S = raw.student_count();
    const std::size_t M = raw.question_count();

    std::vector<std::size_t> question_obs(M, 0);
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < M; ++j)
            if (raw.at(i, j) != Cell::Unobserved) ++question_obs[j];

    std::vector<std::size_t> kept_questions;
    for (std::size_t j = 0; j < M; ++j)
        if (static_cast<double>(question_obs[j]) / static_cast<double>(S) >= min_question_freq)
            kept_questions.push_back(j);
    if (kept_questions.empty()) throw ValidationError("question-frequency filter removed every question");

    std::vector<std::size_t> kept_students;
    for (std::size_t i = 0; i < S; ++i) {
        std::size_t observed = 0;
        for (auto j : kept_questions)
            if (raw.at(i, j) != Cell::Unobserved) ++observed;
        if (static_cast<double>(observed) / static_cast<double>(kept_questions.size()) >= min_student_freq)
            kept_students.push_back(i);
    }
    if (kept_students.empty()) throw ValidationError("student-frequency filter removed every student");

    // Student removal can strand a question with zero observations.
    std::vector<std::size_t> final_questions;
    for (auto j : kept_questions) {
        bool any = false;
        for (auto i : kept_students)
            if (raw.at(i, j) != Cell::Unobserved) {
                any = true;
                break;
            }
        if (any) final_questions.push_back(j);
    }
    if (final_questions.empty()) throw ValidationError("subset filter removed every observation");

    std::vector<std::string> student_ids, question_ids;
    for (auto i : kept_students) student_ids.push_back(raw.student_ids()[i]);
    for (auto j : final_questions) question_ids.push_back(raw.question_ids()[j]);

    ResponseMatrix subset(student_ids, question_ids);
    for (std::size_t a = 0; a < kept_students.size(); ++a)
        for (std::size_t b = 0; b < final_questions.size(); ++b)
            subset.set(a, b, raw.at(kept_students[a], final_questions[b]));
    subset.validate();
    return subset;
}

DataSplit split(const ResponseMatrix& responses, double test_ratio,
                double validation_ratio_of_train, RandomSource rng) {
    if (test_ratio <= 0 || test_ratio >= 1)
        throw ConfigError("test_ratio must lie in (0,1)");
    if (validation_ratio_of_train < 0 || validation_ratio_of_train >= 1)
        throw ConfigError("validation_ratio_of_train must lie in [0,1)");

    const auto cells = responses.observed_cells();
    const std::size_t S = responses.student_count();

    std::vector<std::size_t> per_student(S, 0);
    for (const auto& cell : cells) ++per_student[cell.student];

    DataSplit result;
    std::vector<CellRef> pool;
    std::vector<CellRef> forced_train;
    std::size_t single_students = 0;
    for (const auto& cell : cells) {
        if (per_student[cell.student] == 1) {
            forced_train.push_back(cell);
            ++single_students;
        } else {
            pool.push_back(cell);
        }
    }
    if (single_students > 0)
        result.warnings.push_back(std::to_string(single_students) +
                                  " student(s) with a single observed response kept in train");

    std::size_t n_test = static_cast<std::size_t>(std::llround(test_ratio * static_cast<double>(cells.size())));
    std::size_t n_val = static_cast<std::size_t>(
        std::llround(validation_ratio_of_train * static_cast<double>(cells.size() - n_test)));
    if (n_test + n_val > pool.size()) {
        n_test = std::min(n_test, pool.size());
        n_val = std::min(n_val, pool.size() - n_test);
        result.warnings.push_back("requested ratios exceed splittable cells; test/validation truncated");
    }

    constexpr int kMaxAttempts = 100;
    std::vector<CellRef> shuffled;
    bool satisfied = false;
    for (int attempt = 0; attempt < kMaxAttempts && !satisfied; ++attempt) {
        RandomSource attempt_rng = rng.derive(static_cast<std::uint64_t>(attempt));
        shuffled = pool;
        attempt_rng.shuffle(shuffled);

        std::vector<std::size_t> train_count(S, 0);
        for (const auto& cell : forced_train) ++train_count[cell.student];
        for (std::size_t c = n_test + n_val; c < shuffled.size(); ++c) ++train_count[shuffled[c].student];

        satisfied = true;
        for (std::size_t i = 0; i < S; ++i)
            if (per_student[i] > 0 && train_count[i] == 0) {
                satisfied = false;
                break;
            }
    }
    if (!satisfied)
        result.warnings.push_back("could not guarantee >= 1 training cell per student after " +
                                  std::to_string(kMaxAttempts) + " draws; guarantee relaxed");

    result.test.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_test));
    result.validation.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_test),
                             shuffled.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    result.train.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), shuffled.end());
    result.train.insert(result.train.end(), forced_train.begin(), forced_train.end());

    std::sort(result.train.begin(), result.train.end());
    std::sort(result.validation.begin(), result.validation.end());
    std::sort(result.test.begin(), result.test.end());
    return result;
}

std::vector<CellRef> merge_cells(const std::vector<CellRef>& a, const std::vector<CellRef>& b) {
    std::vector<CellRef> merged;
    merged.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(merged));
    return merged;
}

std::vector<std::uint8_t> observed_truth(const ResponseMatrix& responses,
                                         std::span<const CellRef> cells) {
    std::vector<std::uint8_t> truth;
    truth.reserve(cells.size());
    for (const auto& cell : cells) {
        const Cell value = responses.at(cell.student, cell.question);
        if (value == Cell::Unobserved)
            throw ValidationError("truth requested for an unobserved cell");
        truth.push_back(value == Cell::Correct);
    }
    return truth;
}

}  // namespace cogdiag
