#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace cogdiag {

/// Mean absolute error. Throws ValidationError on empty or mismatched input.
double mae(std::span<const double> pred, std::span<const std::uint8_t> truth);

/// Root mean square error.
double rmse(std::span<const double> pred, std::span<const std::uint8_t> truth);

/// Rank-based (Mann-Whitney) AUC with midranks for ties; nullopt when only
/// one class is present.
std::optional<double> auc(std::span<const double> pred, std::span<const std::uint8_t> truth);

}  // namespace cogdiag
