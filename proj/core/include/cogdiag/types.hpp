#pragma once

#include <compare>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace cogdiag {

/// A binary vector; entries are 0 or 1.
using BitVec = std::vector<std::uint8_t>;

bool all_zero(const BitVec& v);

/// True iff a[k] >= b[k] for every component (same length required).
bool dominates(const BitVec& a, const BitVec& b);

/// Question x skill incidence matrix. Row j is question j's tested-skill vector.
struct QMatrix {
    std::vector<BitVec> rows;
    std::vector<std::string> question_ids;
    std::vector<std::string> skill_ids;

    std::size_t question_count() const { return rows.size(); }
    std::size_t skill_count() const { return skill_ids.size(); }

    /// Throws ValidationError on non-binary entries, id/shape mismatches,
    /// duplicate ids, or an all-zero row (a question must test >= 1 skill).
    void validate() const;
};

/// Builds and validates in one step.
QMatrix make_qmatrix(std::vector<BitVec> rows, std::vector<std::string> question_ids,
                     std::vector<std::string> skill_ids);

/// Synthetic skill labels "skill-0".."skill-K-1" for unsupervised output.
std::vector<std::string> synthetic_skill_ids(std::size_t count);

/// Per-student binary mastery vector. determined[k] is 1 where the bit was
/// forced by bounds rather than drawn at random.
struct SkillProfile {
    BitVec bits;
    BitVec determined;

    /// Number of mastered skills.
    int level() const { return std::accumulate(bits.begin(), bits.end(), 0); }
};

enum class Cell : std::uint8_t { Incorrect = 0, Correct = 1, Unobserved = 2 };

struct CellRef {
    std::uint32_t student = 0;
    std::uint32_t question = 0;

    friend auto operator<=>(const CellRef&, const CellRef&) = default;
};

/// Student x question response matrix with first-class unobserved cells.
/// Mutable only while being filled; treat as immutable once validated.
class ResponseMatrix {
public:
    ResponseMatrix() = default;
    ResponseMatrix(std::vector<std::string> student_ids, std::vector<std::string> question_ids);

    Cell at(std::size_t student, std::size_t question) const {
        return cells_[student * question_ids_.size() + question];
    }
    void set(std::size_t student, std::size_t question, Cell value) {
        cells_[student * question_ids_.size() + question] = value;
    }

    std::size_t student_count() const { return student_ids_.size(); }
    std::size_t question_count() const { return question_ids_.size(); }
    const std::vector<std::string>& student_ids() const { return student_ids_; }
    const std::vector<std::string>& question_ids() const { return question_ids_; }

    std::size_t observed_count() const;
    /// All observed cells in row-major (student, question) order.
    std::vector<CellRef> observed_cells() const;

    /// Throws ValidationError unless ids are unique and nonempty and every
    /// student row and question column has at least one observed cell.
    void validate() const;

    bool operator==(const ResponseMatrix&) const = default;

private:
    std::vector<std::string> student_ids_;
    std::vector<std::string> question_ids_;
    std::vector<Cell> cells_;
};

/// Disjoint train/validation/test cell sets covering the observed cells.
struct DataSplit {
    std::vector<CellRef> train;
    std::vector<CellRef> validation;
    std::vector<CellRef> test;
    std::vector<std::string> warnings;
};

}  // namespace cogdiag
