#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cogdiag/dataset.hpp"
#include "cogdiag/error.hpp"
#include "cogdiag/esve.hpp"
#include "cogdiag/hbca.hpp"
#include "cogdiag/synth.hpp"
#include "helpers.hpp"

using namespace cogdiag;
using test::bits;

TEST_CASE("perfect implication creates a covering edge") {
    // Every student who solves q0 also solves q1.
    const auto responses = test::responses_from({"11", "11", "01", "00"});
    const auto cells = responses.observed_cells();
    const auto graph = build_covering_graph(responses, cells, 0.85);
    CHECK(graph.beta_at(0, 1) == doctest::Approx(1.0));
    CHECK(std::find(graph.edges.begin(), graph.edges.end(),
                    std::make_pair(std::uint32_t{0}, std::uint32_t{1})) != graph.edges.end());
    // q1 does not imply q0 strongly enough: 2 of 3 q1-solvers solve q0.
    CHECK(graph.beta_at(1, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(std::find(graph.edges.begin(), graph.edges.end(),
                    std::make_pair(std::uint32_t{1}, std::uint32_t{0})) == graph.edges.end());
}

TEST_CASE("out-of-range eta is a config error") {
    const auto responses = test::responses_from({"11"});
    const auto cells = responses.observed_cells();
    CHECK_THROWS_AS(build_covering_graph(responses, cells, 1.01), ConfigError);
    CHECK_THROWS_AS(build_covering_graph(responses, cells, 0.0), ConfigError);
}

TEST_CASE("pairs without co-observation stay undefined") {
    const auto responses = test::responses_from({"1N", "N1"});
    const auto cells = responses.observed_cells();
    const auto graph = build_covering_graph(responses, cells, 0.5);
    CHECK_FALSE(graph.beta_defined[0 * 2 + 1]);
    CHECK(graph.edges.empty());
}

TEST_CASE("a three-question chain makes the hard question the parent") {
    // q2-solvers always solve q0 and q1; q1-solvers always solve q0.
    const auto responses = test::responses_from({"111", "110", "110", "100", "100", "000"});
    const auto cells = responses.observed_cells();
    const auto graph = build_covering_graph(responses, cells, 0.9);
    auto has_edge = [&](std::uint32_t w, std::uint32_t z) {
        return std::find(graph.edges.begin(), graph.edges.end(), std::make_pair(w, z)) !=
               graph.edges.end();
    };
    CHECK(has_edge(2, 0));
    CHECK(has_edge(2, 1));
    CHECK(has_edge(1, 0));
    CHECK_FALSE(has_edge(0, 2));
    CHECK(graph.parent_count[0] == 2);
    CHECK(graph.parent_count[1] == 1);
    CHECK(graph.parent_count[2] == 0);
}

TEST_CASE("qst assigns parents the OR of their children") {
    // With flip_prob 0 the parent row must equal the OR exactly.
    const auto responses = test::responses_from({"111", "110", "110", "100", "100", "000"});
    const auto cells = responses.observed_cells();
    const auto graph = build_covering_graph(responses, cells, 0.9);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RandomSource rng(seed);
        const auto q = qst_init(graph, 4, 0.0, 0.4, rng);
        BitVec expected(4, 0);
        for (std::size_t k = 0; k < 4; ++k) expected[k] = q.rows[0][k] | q.rows[1][k];
        CHECK(q.rows[2] == expected);
        for (const auto& row : q.rows) CHECK_FALSE(all_zero(row));
    }
}

TEST_CASE("qst rows always dominate their children even with flips") {
    const auto responses = test::responses_from({"111", "110", "110", "100", "100", "000"});
    const auto cells = responses.observed_cells();
    const auto graph = build_covering_graph(responses, cells, 0.9);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        RandomSource rng(seed);
        const auto q = qst_init(graph, 5, 0.3, 0.4, rng);
        for (const auto& [w, z] : graph.edges)
            CHECK(dominates(q.rows[w], q.rows[z]));
    }
}

TEST_CASE("a flip probability of one saturates parent rows") {
    const auto responses = test::responses_from({"111", "110", "110", "100", "100", "000"});
    const auto cells = responses.observed_cells();
    const auto graph = build_covering_graph(responses, cells, 0.9);
    RandomSource rng(1);
    const auto q = qst_init(graph, 3, 0.999999, 0.5, rng);
    CHECK(q.rows[2] == bits("111"));
}

TEST_CASE("an empty edge set means every question is a random nonzero leaf") {
    const auto responses = test::responses_from({"1N", "N1"});
    const auto cells = responses.observed_cells();
    const auto graph = build_covering_graph(responses, cells, 0.5);
    RandomSource rng(3);
    const auto q = qst_init(graph, 6, 0.2, 0.3, rng);
    for (const auto& row : q.rows) CHECK_FALSE(all_zero(row));
}

TEST_CASE("da conflict condition mirrors ESVE with flipped inequalities") {
    CHECK(da_conflict_condition(bits("01"), bits("11")));
    CHECK_FALSE(da_conflict_condition(bits("10"), bits("01")));
    CHECK(da_conflict_condition(bits("11"), bits("11")));
    CHECK_THROWS_AS(da_conflict_condition(bits("1"), bits("11")), ValidationError);
}

TEST_CASE("da_estimate reproduces the single-pair trace") {
    RandomSource rng(1);
    const auto estimate = da_estimate({bits("110")}, {bits("100")}, 3, rng);
    CHECK(estimate.upper == bits("110"));
    CHECK(estimate.lower_indicator == bits("010"));
    CHECK(estimate.row[1] == 1);
    CHECK(estimate.row[2] == 0);
    CHECK((estimate.row[0] == 0 || estimate.row[0] == 1));
    CHECK(estimate.removed_correct.empty());
    CHECK(estimate.removed_wrong.empty());
}

TEST_CASE("da rows stay inside the AND of reliable solvers") {
    RandomSource rng(2);
    const auto estimate = da_estimate({bits("101"), bits("111")}, {}, 3, rng);
    CHECK(estimate.upper == bits("101"));
    CHECK(estimate.row[1] == 0);
    CHECK(dominates(estimate.upper, estimate.row));
}

TEST_CASE("da machinery on the complemented problem equals esve machinery") {
    // Noise-free random instances: complement every question vector, swap
    // nothing else, and the DA bounds/assignment must mirror ESVE's bitwise.
    RandomSource instance_rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t K = 1 + instance_rng.below(4);
        LabeledQuestionSets sets;
        std::vector<BitVec> complemented_right, complemented_wrong;
        const std::size_t n_right = instance_rng.below(6);
        const std::size_t n_wrong = instance_rng.below(6);
        std::uint32_t index = 0;
        for (std::size_t n = 0; n < n_right; ++n) {
            BitVec v(K);
            for (auto& b : v) b = instance_rng.bit();
            BitVec c(K);
            for (std::size_t k = 0; k < K; ++k) c[k] = 1 - v[k];
            sets.right.push_back({index++, v});
            complemented_right.push_back(c);
        }
        for (std::size_t n = 0; n < n_wrong; ++n) {
            BitVec v(K);
            for (auto& b : v) b = instance_rng.bit();
            BitVec c(K);
            for (std::size_t k = 0; k < K; ++k) c[k] = 1 - v[k];
            sets.wrong.push_back({index++, v});
            complemented_wrong.push_back(c);
        }

        const std::uint64_t seed = instance_rng.next_u64();
        const auto filtered = filter_unreliable(sets);
        const auto bounds = estimate_bounds(filtered.reliable, K);
        RandomSource esve_rng(seed);
        const auto profile = assign_profile(bounds, esve_rng);

        RandomSource da_rng(seed);
        const auto estimate = da_estimate(complemented_right, complemented_wrong, K, da_rng);

        for (std::size_t k = 0; k < K; ++k) {
            CHECK(estimate.upper[k] == 1 - bounds.lower[k]);
            CHECK(estimate.lower_indicator[k] == bounds.upper_indicator[k]);
            CHECK(estimate.row[k] == 1 - profile.bits[k]);
        }
    }
}

TEST_CASE("da_solve re-estimates rows and skips unobserved questions") {
    const auto responses = test::responses_from({"1N", "0N"});
    std::vector<std::optional<SkillProfile>> profiles(2);
    profiles[0] = SkillProfile{bits("110"), bits("111")};
    profiles[1] = SkillProfile{bits("100"), bits("111")};
    const auto cells = responses.observed_cells();
    RandomSource rng(5);
    const auto row = da_solve(0, profiles, responses, cells, 100, rng);
    REQUIRE(row.has_value());
    CHECK((*row)[1] == 1);
    CHECK((*row)[2] == 0);
    RandomSource rng2(5);
    CHECK_FALSE(da_solve(1, profiles, responses, cells, 100, rng2).has_value());
}

TEST_CASE("da_solve never returns an all-zero row") {
    // Correct profiles AND to zero, wrong side empty, so every component is
    // an unforced coin; exhaust seeds to hit the all-zero draw.
    const auto responses = test::responses_from({"1", "1"});
    std::vector<std::optional<SkillProfile>> profiles(2);
    profiles[0] = SkillProfile{bits("10"), bits("11")};
    profiles[1] = SkillProfile{bits("01"), bits("11")};
    const auto cells = responses.observed_cells();
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        RandomSource rng(seed);
        const auto row = da_solve(0, profiles, responses, cells, 100, rng);
        REQUIRE(row.has_value());
        CHECK_FALSE(all_zero(*row));
    }
}

TEST_CASE("hbca config validation rejects bad values") {
    HbcaConfig config;
    config.eta = 1.01;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = {};
    config.replace_count = config.population_size + 1;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = {};
    config.dim_lo = 3;
    config.dim_hi = 2;
    CHECK_THROWS_AS(config.validate(), ConfigError);
}

namespace {

HbcaConfig desk_config() {
    HbcaConfig config;
    config.eta = 0.85;
    config.dim_lo = 3;
    config.dim_hi = 3;
    config.population_size = 6;
    config.iterations = 4;
    config.replace_count = 2;
    config.da_sample_size = 50;
    config.selecting_goal = SelectingGoal::Sd;
    return config;
}

}  // namespace

TEST_CASE("iterations=0 returns the best QST initialisation") {
    GenerativeSpec spec;
    spec.students = 50;
    spec.questions = 10;
    spec.skills = 3;
    spec.slip.base = 0.1;
    spec.guess.base = 0.1;
    spec.seed = 61;
    const auto data = generate(spec);
    const auto ds = split(data.responses, 0.2, 0.2, RandomSource(61));

    auto config = desk_config();
    config.iterations = 0;
    const auto result = hbca_run(data.responses, ds, config, RandomSource(1));
    REQUIRE(result.dims.size() == 1);
    CHECK(result.dims[0].iterations.size() == 1);
    CHECK(result.best.origin == CandidateOrigin::Qst);
    CHECK(result.best.validation_mae == result.dims[0].best_qst.validation_mae);
}

TEST_CASE("best-so-far validation MAE is non-increasing and runs are reproducible") {
    GenerativeSpec spec;
    spec.students = 60;
    spec.questions = 10;
    spec.skills = 3;
    spec.slip.base = 0.1;
    spec.guess.base = 0.1;
    spec.seed = 62;
    const auto data = generate(spec);
    const auto ds = split(data.responses, 0.2, 0.2, RandomSource(62));

    const auto config = desk_config();
    const auto a = hbca_run(data.responses, ds, config, RandomSource(9));
    const auto b = hbca_run(data.responses, ds, config, RandomSource(9));
    CHECK(hbca_report_jsonl(a) == hbca_report_jsonl(b));
    CHECK(a.best.q.rows == b.best.q.rows);

    for (const auto& dim : a.dims) {
        for (std::size_t t = 1; t < dim.iterations.size(); ++t)
            CHECK(dim.iterations[t].best_so_far <= dim.iterations[t - 1].best_so_far + 1e-12);
        CHECK(dim.iterations.size() == static_cast<std::size_t>(config.iterations) + 1);
    }
    CHECK(a.best.validation_mae <= a.dims[0].best_qst.validation_mae + 1e-12);

    // Worker count must not change anything.
    auto parallel = config;
    parallel.workers = 4;
    const auto c = hbca_run(data.responses, ds, parallel, RandomSource(9));
    CHECK(hbca_report_jsonl(a) == hbca_report_jsonl(c));
}

TEST_CASE("hbca carves a validation share when the split has none") {
    GenerativeSpec spec;
    spec.students = 40;
    spec.questions = 8;
    spec.skills = 3;
    spec.slip.base = 0.1;
    spec.guess.base = 0.1;
    spec.seed = 63;
    const auto data = generate(spec);
    DataSplit ds;
    ds.train = data.responses.observed_cells();

    auto config = desk_config();
    config.iterations = 1;
    const auto result = hbca_run(data.responses, ds, config, RandomSource(2));
    CHECK(result.best.validation_mae <= 1.0);
    CHECK(result.best.q.question_count() == 8);
}
