#include "cogdiag/types.hpp"

#include <unordered_set>

#include "cogdiag/error.hpp"

namespace cogdiag {

bool all_zero(const BitVec& v) {
    for (auto b : v)
        if (b) return false;
    return true;
}

bool dominates(const BitVec& a, const BitVec& b) {
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] < b[k]) return false;
    return true;
}

namespace {

void require_unique(const std::vector<std::string>& ids, const char* what) {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
        if (id.empty()) throw ValidationError(std::string("empty ") + what + " id");
        if (!seen.insert(id).second)
            throw ValidationError(std::string("duplicate ") + what + " id: " + id);
    }
}

}  // namespace

void QMatrix::validate() const {
    if (rows.empty()) throw ValidationError("Q-matrix has no questions");
    if (skill_ids.empty()) throw ValidationError("Q-matrix has no skills");
    if (question_ids.size() != rows.size())
        throw ValidationError("Q-matrix question id count does not match row count");
    require_unique(question_ids, "question");
    require_unique(skill_ids, "skill");
    for (std::size_t j = 0; j < rows.size(); ++j) {
        if (rows[j].size() != skill_ids.size())
            throw ValidationError("Q-matrix row " + question_ids[j] + " has wrong width");
        bool any = false;
        for (auto b : rows[j]) {
            if (b > 1) throw ValidationError("Q-matrix row " + question_ids[j] + " has a non-binary entry");
            any = any || b;
        }
        if (!any)
            throw ValidationError("Q-matrix row " + question_ids[j] + " is all-zero (a question must test >= 1 skill)");
    }
}

QMatrix make_qmatrix(std::vector<BitVec> rows, std::vector<std::string> question_ids,
                     std::vector<std::string> skill_ids) {
    QMatrix q{std::move(rows), std::move(question_ids), std::move(skill_ids)};
    q.validate();
    return q;
}

std::vector<std::string> synthetic_skill_ids(std::size_t count) {
    std::vector<std::string> ids;
    ids.reserve(count);
    for (std::size_t k = 0; k < count; ++k) ids.push_back("skill-" + std::to_string(k));
    return ids;
}

ResponseMatrix::ResponseMatrix(std::vector<std::string> student_ids,
                               std::vector<std::string> question_ids)
    : student_ids_(std::move(student_ids)),
      question_ids_(std::move(question_ids)),
      cells_(student_ids_.size() * question_ids_.size(), Cell::Unobserved) {}

std::size_t ResponseMatrix::observed_count() const {
    std::size_t n = 0;
    for (auto c : cells_)
        if (c != Cell::Unobserved) ++n;
    return n;
}

std::vector<CellRef> ResponseMatrix::observed_cells() const {
    std::vector<CellRef> cells;
    cells.reserve(observed_count());
    for (std::size_t i = 0; i < student_count(); ++i)
        for (std::size_t j = 0; j < question_count(); ++j)
            if (at(i, j) != Cell::Unobserved)
                cells.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
    return cells;
}

void ResponseMatrix::validate() const {
    if (student_ids_.empty()) throw ValidationError("response matrix has no students");
    if (question_ids_.empty()) throw ValidationError("response matrix has no questions");
    require_unique(student_ids_, "student");
    require_unique(question_ids_, "question");
    std::vector<bool> question_seen(question_count(), false);
    for (std::size_t i = 0; i < student_count(); ++i) {
        bool row_seen = false;
        for (std::size_t j = 0; j < question_count(); ++j) {
            if (at(i, j) != Cell::Unobserved) {
                row_seen = true;
                question_seen[j] = true;
            }
        }
        if (!row_seen)
            throw ValidationError("student " + student_ids_[i] + " has no observed responses");
    }
    for (std::size_t j = 0; j < question_count(); ++j)
        if (!question_seen[j])
            throw ValidationError("question " + question_ids_[j] + " has no observed responses");
}

}  // namespace cogdiag
