#pragma once

#include <string>
#include <vector>

#include "cogdiag/types.hpp"

namespace cogdiag::test {

/// Builds a BitVec from a string like "101".
inline BitVec bits(const std::string& text) {
    BitVec v;
    for (char c : text) v.push_back(c == '1');
    return v;
}

/// Builds a ResponseMatrix from rows like {"10N", "011"}; N = unobserved.
inline ResponseMatrix responses_from(const std::vector<std::string>& rows) {
    std::vector<std::string> student_ids, question_ids;
    for (std::size_t i = 0; i < rows.size(); ++i) student_ids.push_back("s" + std::to_string(i));
    for (std::size_t j = 0; j < rows.front().size(); ++j)
        question_ids.push_back("q" + std::to_string(j));
    ResponseMatrix matrix(student_ids, question_ids);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            if (rows[i][j] == '1')
                matrix.set(i, j, Cell::Correct);
            else if (rows[i][j] == '0')
                matrix.set(i, j, Cell::Incorrect);
        }
    return matrix;
}

/// Builds a QMatrix from rows like {"10", "01"}.
inline QMatrix qmatrix_from(const std::vector<std::string>& rows) {
    std::vector<BitVec> q_rows;
    std::vector<std::string> question_ids;
    for (std::size_t j = 0; j < rows.size(); ++j) {
        q_rows.push_back(bits(rows[j]));
        question_ids.push_back("q" + std::to_string(j));
    }
    return make_qmatrix(q_rows, question_ids, synthetic_skill_ids(rows.front().size()));
}

}  // namespace cogdiag::test
