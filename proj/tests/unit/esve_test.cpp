#include <doctest.h>

#include <algorithm>

#include "cogdiag/error.hpp"
#include "cogdiag/esve.hpp"
#include "cogdiag/predict.hpp"
#include "cogdiag/synth.hpp"
#include "helpers.hpp"

using namespace cogdiag;
using test::bits;

namespace {

LabeledQuestionSets make_sets(const std::vector<std::string>& right,
                              const std::vector<std::string>& wrong) {
    LabeledQuestionSets sets;
    std::uint32_t index = 0;
    for (const auto& v : right) sets.right.push_back({index++, bits(v)});
    for (const auto& v : wrong) sets.wrong.push_back({index++, bits(v)});
    return sets;
}

}  // namespace

TEST_CASE("partition splits observed training cells by answer result") {
    const auto responses = test::responses_from({"10N"});
    const auto q = test::qmatrix_from({"10", "01", "11"});
    const auto cells = responses.observed_cells();
    const auto sets = partition_questions(0, responses, q, cells);
    REQUIRE(sets.right.size() == 1);
    REQUIRE(sets.wrong.size() == 1);
    CHECK(sets.right[0].question == 0);
    CHECK(sets.wrong[0].question == 1);
}

TEST_CASE("partition of an all-correct student leaves the wrong set empty") {
    const auto responses = test::responses_from({"111"});
    const auto q = test::qmatrix_from({"10", "01", "11"});
    const auto cells = responses.observed_cells();
    const auto sets = partition_questions(0, responses, q, cells);
    CHECK(sets.right.size() == 3);
    CHECK(sets.wrong.empty());
}

TEST_CASE("partition uses only training cells") {
    const auto responses = test::responses_from({"101"});
    const auto q = test::qmatrix_from({"10", "01", "11"});
    const std::vector<CellRef> train{{0, 0}};
    const auto sets = partition_questions(0, responses, q, train);
    CHECK(sets.right.size() == 1);
    CHECK(sets.wrong.empty());
}

TEST_CASE("conflict condition is componentwise domination of wrong by right") {
    CHECK_FALSE(conflict_condition(bits("001"), bits("111")));  // locally self-consistent
    CHECK(conflict_condition(bits("110"), bits("100")));
    CHECK(conflict_condition(bits("101"), bits("101")));  // equality satisfies >= everywhere
    CHECK_THROWS_AS(conflict_condition(bits("10"), bits("100")), ValidationError);
}

TEST_CASE("conflict detection increments both members of each conflicting pair") {
    const auto sets = make_sets({"10"}, {"10", "01"});
    const auto report = detect_conflicts(sets);
    CHECK(report.right_degree == std::vector<std::uint32_t>{1});
    CHECK(report.wrong_degree == std::vector<std::uint32_t>{1, 0});
    REQUIRE(report.conflicting_pairs.size() == 1);

    const auto wide = make_sets({"11"}, {"10", "01"});
    const auto wide_report = detect_conflicts(wide);
    CHECK(wide_report.right_degree == std::vector<std::uint32_t>{2});
    CHECK(wide_report.wrong_degree == std::vector<std::uint32_t>{1, 1});
}

TEST_CASE("no wrong questions means no conflicts") {
    const auto report = detect_conflicts(make_sets({"10", "11"}, {}));
    CHECK_FALSE(report.any());
}

TEST_CASE("degrees always equal the number of pairs containing the question") {
    RandomSource rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        LabeledQuestionSets sets;
        const std::size_t K = 1 + rng.below(4);
        std::uint32_t index = 0;
        for (std::size_t n = rng.below(5); n > 0; --n) {
            BitVec v(K);
            for (auto& b : v) b = rng.bit();
            sets.right.push_back({index++, v});
        }
        for (std::size_t n = rng.below(5); n > 0; --n) {
            BitVec v(K);
            for (auto& b : v) b = rng.bit();
            sets.wrong.push_back({index++, v});
        }
        const auto report = detect_conflicts(sets);
        std::size_t right_sum = 0, wrong_sum = 0;
        for (auto d : report.right_degree) right_sum += d;
        for (auto d : report.wrong_degree) wrong_sum += d;
        CHECK(right_sum == report.conflicting_pairs.size());
        CHECK(wrong_sum == report.conflicting_pairs.size());
    }
}

TEST_CASE("filtering is the identity when there is no conflict") {
    const auto sets = make_sets({"001"}, {"111"});
    const auto outcome = filter_unreliable(sets);
    CHECK(outcome.removed_right.empty());
    CHECK(outcome.removed_wrong.empty());
    CHECK(outcome.reliable.right.size() == 1);
    CHECK(outcome.reliable.wrong.size() == 1);
    CHECK(outcome.rounds == 0);
}

TEST_CASE("a tied maximum removes both sides and may empty the sets") {
    const auto outcome = filter_unreliable(make_sets({"10"}, {"10"}));
    CHECK(outcome.reliable.right.empty());
    CHECK(outcome.reliable.wrong.empty());
    CHECK(outcome.removed_right.size() == 1);
    CHECK(outcome.removed_wrong.size() == 1);
}

TEST_CASE("only maximum-degree questions are removed each round") {
    // Pairs: ([1,1],[1,0]) conflicts, ([0,1],[1,0]) does not.
    const auto outcome = filter_unreliable(make_sets({"11", "01"}, {"10"}));
    REQUIRE(outcome.reliable.right.size() == 1);
    CHECK(outcome.reliable.right[0].vector == bits("01"));
    CHECK(outcome.reliable.wrong.empty());
    CHECK(outcome.removed_right.size() == 1);
    CHECK(outcome.removed_wrong.size() == 1);
}

TEST_CASE("surviving pairs satisfy the local self-consistency condition") {
    RandomSource rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        LabeledQuestionSets sets;
        const std::size_t K = 1 + rng.below(4);
        std::uint32_t index = 0;
        for (std::size_t n = rng.below(7); n > 0; --n) {
            BitVec v(K);
            for (auto& b : v) b = rng.bit();
            sets.right.push_back({index++, v});
        }
        for (std::size_t n = rng.below(7); n > 0; --n) {
            BitVec v(K);
            for (auto& b : v) b = rng.bit();
            sets.wrong.push_back({index++, v});
        }
        const std::size_t total = sets.right.size() + sets.wrong.size();
        const auto outcome = filter_unreliable(sets);
        CHECK(outcome.rounds <= total);
        for (const auto& right : outcome.reliable.right)
            for (const auto& wrong : outcome.reliable.wrong) {
                bool witness = false;
                for (std::size_t k = 0; k < right.vector.size(); ++k)
                    if (right.vector[k] < wrong.vector[k]) witness = true;
                CHECK(witness);
            }
    }
}

TEST_CASE("bounds follow the worked two-question example") {
    const auto outcome = filter_unreliable(make_sets({"001"}, {"111"}));
    const auto bounds = estimate_bounds(outcome.reliable, 3);
    CHECK(bounds.lower == bits("001"));
    CHECK(bounds.upper_indicator == bits("110"));
}

TEST_CASE("an empty wrong set leaves the upper indicator clear") {
    const auto bounds = estimate_bounds(make_sets({"10", "01"}, {}), 2);
    CHECK(bounds.lower == bits("11"));
    CHECK(bounds.upper_indicator == bits("00"));
}

TEST_CASE("assignment forces bounded bits and randomises the rest") {
    RandomSource rng(3);
    ComponentBounds bounds{bits("001"), bits("110")};
    const auto profile = assign_profile(bounds, rng);
    CHECK(profile.bits == bits("001"));
    CHECK(profile.determined == bits("111"));

    ComponentBounds forced{bits("10"), bits("01")};
    const auto both = assign_profile(forced, rng);
    CHECK(both.bits == bits("10"));

    ComponentBounds open{bits("0"), bits("0")};
    const auto free = assign_profile(open, rng);
    CHECK(free.determined == bits("0"));
    CHECK((free.bits[0] == 0 || free.bits[0] == 1));
}

TEST_CASE("esve_solve reproduces the worked example profile") {
    // One right question [0,0,1] and one wrong question [1,1,1].
    const auto responses = test::responses_from({"10"});
    const auto q = test::qmatrix_from({"001", "111"});
    const auto cells = responses.observed_cells();
    RandomSource rng(1);
    const auto result = esve_solve(0, responses, q, cells, rng);
    CHECK(result.profile.bits == bits("001"));
    CHECK(result.profile.determined == bits("111"));
    CHECK(result.filtered_from_right.empty());
    CHECK(result.filtered_from_wrong.empty());
    CHECK(result.residual_inconsistent_wrong.empty());
}

TEST_CASE("an all-correct student dominates the OR of attempted vectors") {
    const auto responses = test::responses_from({"111"});
    const auto q = test::qmatrix_from({"100", "010", "110"});
    const auto cells = responses.observed_cells();
    RandomSource rng(2);
    const auto result = esve_solve(0, responses, q, cells, rng);
    CHECK(result.profile.bits[0] == 1);
    CHECK(result.profile.bits[1] == 1);
    CHECK(result.profile.determined == bits("110"));
}

TEST_CASE("a reliable wrong question covered by the union is recorded as residual") {
    // Rights [1,0] and [0,1] force lower=[1,1]; the wrong [1,1] conflicts
    // with neither right vector but is covered by their union.
    const auto responses = test::responses_from({"110"});
    const auto q = test::qmatrix_from({"10", "01", "11"});
    const auto cells = responses.observed_cells();
    RandomSource rng(4);
    const auto result = esve_solve(0, responses, q, cells, rng);
    CHECK(result.residual_inconsistent_wrong == std::vector<std::uint32_t>{2});
    CHECK(result.profile.bits == bits("11"));
}

TEST_CASE("esve_solve is deterministic for a fixed seed") {
    const auto responses = test::responses_from({"10N1", "0111"});
    const auto q = test::qmatrix_from({"100", "010", "001", "110"});
    const auto cells = responses.observed_cells();
    RandomSource a(77), b(77);
    const auto ra = esve_solve(0, responses, q, cells, a);
    const auto rb = esve_solve(0, responses, q, cells, b);
    CHECK(ra.profile.bits == rb.profile.bits);
    CHECK(ra.profile.determined == rb.profile.determined);
}

TEST_CASE("noise-free students are reconstructed inside the feasible set") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        GenerativeSpec spec;
        spec.students = 20;
        spec.questions = 12;
        spec.skills = 4;
        spec.q_density = 0.4;
        spec.profile_density = 0.5;
        spec.seed = seed;
        const auto data = generate(spec);
        const auto cells = data.responses.observed_cells();
        const auto results = esve_solve_all(data.responses, data.q, cells, RandomSource(seed));
        for (std::size_t i = 0; i < data.profiles.size(); ++i) {
            REQUIRE(results[i].has_value());
            const auto& r = *results[i];
            // Nothing should be filtered on noise-free data.
            CHECK(r.filtered_from_right.empty());
            CHECK(r.filtered_from_wrong.empty());
            CHECK(r.residual_inconsistent_wrong.empty());
            // The profile must explain every observed response.
            const auto sets = partition_questions(i, data.responses, data.q, cells);
            const auto feasible = brute_force_feasible_profiles(sets, data.q.skill_count());
            CHECK(std::find(feasible.begin(), feasible.end(), r.profile.bits) != feasible.end());
            // And the generative profile obeys the bounds from below.
            for (std::size_t k = 0; k < data.q.skill_count(); ++k)
                CHECK(r.bounds.lower[k] <= data.profiles[i].bits[k]);
        }
    }
}

TEST_CASE("profile exports carry ids, masks and filtered sets") {
    const auto responses = test::responses_from({"10"});
    const auto q = test::qmatrix_from({"001", "111"});
    const auto cells = responses.observed_cells();
    const auto results = esve_solve_all(responses, q, cells, RandomSource(1));
    const auto csv = profiles_csv(results, responses, q);
    CHECK(csv.find("student_id,skill-0,skill-1,skill-2,skill-0_det") != std::string::npos);
    CHECK(csv.find("s0,0,0,1,1,1,1") != std::string::npos);
    const auto json = profiles_json(results, responses, q);
    CHECK(json.find("\"bits\": \"001\"") != std::string::npos);
}
