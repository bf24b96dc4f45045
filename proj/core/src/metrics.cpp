#include "cogdiag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cogdiag/error.hpp"

namespace cogdiag {

namespace {

void check_input(std::span<const double> pred, std::span<const std::uint8_t> truth) {
    if (pred.empty()) throw ValidationError("metric input is empty");
    if (pred.size() != truth.size()) throw ValidationError("metric inputs have different lengths");
}

}  // namespace

double mae(std::span<const double> pred, std::span<const std::uint8_t> truth) {
    check_input(pred, truth);
    double sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
    return sum / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const std::uint8_t> truth) {
    check_input(pred, truth);
    double sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(pred.size()));
}

std::optional<double> auc(std::span<const double> pred, std::span<const std::uint8_t> truth) {
    check_input(pred, truth);
    const std::size_t n = pred.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pred[a] < pred[b]; });

    double positive_rank_sum = 0;
    std::size_t positives = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && pred[order[j]] == pred[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t t = i; t < j; ++t) {
            if (truth[order[t]]) {
                positive_rank_sum += midrank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) return std::nullopt;
    const double u = positive_rank_sum - static_cast<double>(positives) *
                                             (static_cast<double>(positives) + 1.0) / 2.0;
    return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

}  // namespace cogdiag
