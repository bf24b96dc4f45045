#include <doctest.h>

#include <algorithm>
#include <set>

#include "cogdiag/dataset.hpp"
#include "cogdiag/error.hpp"
#include "helpers.hpp"

using namespace cogdiag;

TEST_CASE("filter with zero thresholds keeps everything") {
    const auto raw = test::responses_from({"10N", "011", "1N0"});
    const auto filtered = filter_assist_subset(raw, 0.0, 0.0);
    CHECK(filtered == raw);
}

TEST_CASE("a question with a single response is dropped at threshold 0.5") {
    // q2 is answered once out of 4 students.
    const auto raw = test::responses_from({"11N", "10N", "01N", "0N1"});
    const auto filtered = filter_assist_subset(raw, 0.5, 0.0);
    CHECK(filtered.question_count() == 2);
    CHECK(std::find(filtered.question_ids().begin(), filtered.question_ids().end(), "q2") ==
          filtered.question_ids().end());
}

TEST_CASE("student filter runs after the question filter") {
    // q2 is observed 2/5 < 0.5 and is dropped first; s4 then has no
    // responses among the surviving questions and is dropped too, while s3
    // sits exactly at 1/2 and survives.
    const auto raw = test::responses_from({"11N", "11N", "11N", "1N0", "NN1"});
    const auto filtered = filter_assist_subset(raw, 0.5, 0.5);
    CHECK(filtered.student_count() == 4);
    CHECK(filtered.question_count() == 2);
}

TEST_CASE("an over-aggressive filter is an error") {
    const auto raw = test::responses_from({"1N", "N0"});
    CHECK_THROWS_AS(filter_assist_subset(raw, 0.9, 0.9), ValidationError);
}

TEST_CASE("10 cells at test ratio 0.2 split 8 train + 2 test") {
    const auto responses = test::responses_from({"11", "11", "11", "11", "11"});
    const auto ds = split(responses, 0.2, 0.0, RandomSource(1));
    CHECK(ds.train.size() == 8);
    CHECK(ds.test.size() == 2);
    CHECK(ds.validation.empty());
}

TEST_CASE("identical seeds give identical splits") {
    const auto responses = test::responses_from({"1101", "0111", "1011", "1110"});
    const auto a = split(responses, 0.4, 0.2, RandomSource(99));
    const auto b = split(responses, 0.4, 0.2, RandomSource(99));
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);
}

TEST_CASE("split partitions the observed cells for 1000 seeds") {
    const auto responses = test::responses_from({"110110", "011011", "101101", "111001", "010111"});
    const auto observed = responses.observed_cells();
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto ds = split(responses, 0.3, 0.25, RandomSource(seed));
        std::vector<CellRef> all = ds.train;
        all.insert(all.end(), ds.validation.begin(), ds.validation.end());
        all.insert(all.end(), ds.test.begin(), ds.test.end());
        std::sort(all.begin(), all.end());
        REQUIRE(all.size() == observed.size());
        CHECK(all == observed);  // disjointness follows: equal sizes, no repeats after sort-unique
        CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    }
}

TEST_CASE("every student keeps a training cell when feasible") {
    const auto responses = test::responses_from({"11", "11", "11", "11"});
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto ds = split(responses, 0.45, 0.0, RandomSource(seed));
        std::set<std::uint32_t> students_in_train;
        for (const auto& cell : ds.train) students_in_train.insert(cell.student);
        CHECK(students_in_train.size() == 4);
    }
}

TEST_CASE("a single-observation student is forced into train with a warning") {
    const auto responses = test::responses_from({"1NNN", "1111", "1111"});
    const auto ds = split(responses, 0.3, 0.0, RandomSource(5));
    bool found = false;
    for (const auto& cell : ds.train)
        if (cell.student == 0) found = true;
    CHECK(found);
    for (const auto& cell : ds.test) CHECK(cell.student != 0);
    CHECK_FALSE(ds.warnings.empty());
}

TEST_CASE("invalid ratios are config errors") {
    const auto responses = test::responses_from({"11", "11"});
    CHECK_THROWS_AS(split(responses, 0.0, 0.0, RandomSource(1)), ConfigError);
    CHECK_THROWS_AS(split(responses, 1.0, 0.0, RandomSource(1)), ConfigError);
    CHECK_THROWS_AS(split(responses, 0.5, 1.0, RandomSource(1)), ConfigError);
}

TEST_CASE("merge_cells produces a sorted union") {
    const std::vector<CellRef> a{{0, 1}, {2, 0}};
    const std::vector<CellRef> b{{1, 1}};
    const auto merged = merge_cells(a, b);
    REQUIRE(merged.size() == 3);
    CHECK(std::is_sorted(merged.begin(), merged.end()));
}
