#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cogdiag/error.hpp"
#include "cogdiag/metrics.hpp"
#include "cogdiag/random.hpp"

using namespace cogdiag;

TEST_CASE("mae and rmse basics") {
    const std::vector<double> exact{1.0, 0.0, 1.0};
    const std::vector<std::uint8_t> truth{1, 0, 1};
    CHECK(mae(exact, truth) == 0.0);
    CHECK(rmse(exact, truth) == 0.0);

    const std::vector<double> half{0.5, 0.5, 0.5};
    CHECK(mae(half, truth) == doctest::Approx(0.5));
    CHECK(rmse(half, truth) == doctest::Approx(0.5));

    CHECK_THROWS_AS(mae({}, {}), ValidationError);
}

TEST_CASE("mae and rmse are permutation invariant") {
    RandomSource rng(1);
    std::vector<double> pred(50);
    std::vector<std::uint8_t> truth(50);
    for (std::size_t i = 0; i < 50; ++i) {
        pred[i] = rng.uniform01();
        truth[i] = rng.bit();
    }
    std::vector<std::size_t> perm(50);
    for (std::size_t i = 0; i < 50; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<double> pred2(50);
    std::vector<std::uint8_t> truth2(50);
    for (std::size_t i = 0; i < 50; ++i) {
        pred2[i] = pred[perm[i]];
        truth2[i] = truth[perm[i]];
    }
    CHECK(mae(pred, truth) == doctest::Approx(mae(pred2, truth2)));
    CHECK(rmse(pred, truth) == doctest::Approx(rmse(pred2, truth2)));
}

TEST_CASE("rmse dominates mae on random vectors") {
    RandomSource rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(30);
        std::vector<double> pred(n);
        std::vector<std::uint8_t> truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = rng.uniform01();
            truth[i] = rng.bit();
        }
        CHECK(rmse(pred, truth) >= mae(pred, truth) - 1e-12);
    }
}

TEST_CASE("auc separates, degenerates and handles ties by midrank") {
    const std::vector<double> separating{0.1, 0.2, 0.8, 0.9};
    const std::vector<std::uint8_t> truth{0, 0, 1, 1};
    CHECK(auc(separating, truth) == doctest::Approx(1.0));

    const std::vector<double> inverted{0.9, 0.8, 0.2, 0.1};
    CHECK(auc(inverted, truth) == doctest::Approx(0.0));

    const std::vector<std::uint8_t> one_class{1, 1, 1, 1};
    CHECK_FALSE(auc(separating, one_class).has_value());

    // All-tied predictions give exactly 0.5 under midranks.
    const std::vector<double> tied{0.4, 0.4, 0.4, 0.4};
    CHECK(auc(tied, truth) == doctest::Approx(0.5));
}

TEST_CASE("auc of independent predictions approaches one half") {
    RandomSource rng(3);
    const std::size_t n = 100000;
    std::vector<double> pred(n);
    std::vector<std::uint8_t> truth(n);
    for (std::size_t i = 0; i < n; ++i) {
        pred[i] = rng.uniform01();
        truth[i] = rng.bit();
    }
    CHECK(std::abs(*auc(pred, truth) - 0.5) <= 0.01);
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
    RandomSource rng(4);
    std::vector<double> pred(500);
    std::vector<std::uint8_t> truth(500);
    for (std::size_t i = 0; i < 500; ++i) {
        pred[i] = rng.uniform01();
        truth[i] = rng.bit();
    }
    std::vector<double> transformed(500);
    for (std::size_t i = 0; i < 500; ++i)
        transformed[i] = 0.05 + 0.9 * pred[i] * pred[i];  // strictly increasing on [0,1]
    CHECK(*auc(pred, truth) == doctest::Approx(*auc(transformed, truth)));
}
