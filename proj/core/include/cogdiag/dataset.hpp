#pragma once

#include <span>

#include "cogdiag/random.hpp"
#include "cogdiag/types.hpp"

namespace cogdiag {

/// Three-step subset selection for sparse logs: duplicates are already
/// impossible in a ResponseMatrix, then questions observed by fewer than
/// min_question_freq of the students are dropped, then students answering
/// fewer than min_student_freq of the remaining questions are dropped.
/// Questions or students left with no observations are pruned at the end.
ResponseMatrix filter_assist_subset(const ResponseMatrix& raw, double min_question_freq,
                                    double min_student_freq);

/// Per-cell split of the observed cells into train/validation/test.
/// test_ratio is a fraction of all observed cells; validation_ratio_of_train
/// is a fraction of what remains after the test draw. Students with a single
/// observed cell keep it in train (with a warning). The draw is retried a
/// bounded number of times until every student keeps >= 1 training cell,
/// then the guarantee is relaxed with a warning.
DataSplit split(const ResponseMatrix& responses, double test_ratio,
                double validation_ratio_of_train, RandomSource rng);

/// Sorted union of two cell sets (both must be sorted).
std::vector<CellRef> merge_cells(const std::vector<CellRef>& a, const std::vector<CellRef>& b);

/// 0/1 outcomes of the given cells (all must be observed).
std::vector<std::uint8_t> observed_truth(const ResponseMatrix& responses,
                                         std::span<const CellRef> cells);

}  // namespace cogdiag
