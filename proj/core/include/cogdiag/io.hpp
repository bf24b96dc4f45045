#pragma once

#include <filesystem>

#include "cogdiag/types.hpp"

namespace cogdiag {

enum class ResponseFormat { CsvLong, CsvWide };

/// Strict: a repeated (student, question) pair is an error.
/// Lenient: the first occurrence wins.
enum class DuplicatePolicy { Strict, Lenient };

/// csv-long: header `student_id,question_id,score`, score in {0,1}.
/// csv-wide: first column student_id, remaining columns question ids,
/// cells `0|1|NA`. UTF-8, LF line endings; no quoting (ids must not
/// contain commas).
ResponseMatrix load_responses(const std::filesystem::path& path, ResponseFormat format,
                              DuplicatePolicy duplicates = DuplicatePolicy::Strict);
void save_responses(const ResponseMatrix& responses, const std::filesystem::path& path,
                    ResponseFormat format);

/// Q-matrix CSV: header `question_id,<skill ids...>`, binary cells.
QMatrix load_qmatrix(const std::filesystem::path& path);
void save_qmatrix(const QMatrix& q, const std::filesystem::path& path);

/// Reorders q's rows to match responses.question_ids(). Every response
/// question must exist in q; rows for questions absent from the responses
/// are dropped.
QMatrix align_qmatrix(const QMatrix& q, const ResponseMatrix& responses);

}  // namespace cogdiag
