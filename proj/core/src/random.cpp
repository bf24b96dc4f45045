#include "cogdiag/random.hpp"

#include <algorithm>

namespace cogdiag {

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, RandomSource& rng) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    if (count >= n) return all;

    // Partial Fisher-Yates: the first `count` slots end up a uniform sample.
    for (std::size_t i = 0; i < count; ++i) {
        std::swap(all[i], all[i + rng.below(n - i)]);
    }
    all.resize(count);
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace cogdiag
