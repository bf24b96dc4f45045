#include <doctest.h>

#include <cmath>

#include "cogdiag/dina_em.hpp"
#include "cogdiag/error.hpp"
#include "cogdiag/predict.hpp"
#include "cogdiag/synth.hpp"
#include "helpers.hpp"

using namespace cogdiag;

namespace {

void check_monotone_trace(const EmState& state) {
    for (std::size_t t = 1; t < state.log_likelihood_trace.size(); ++t)
        CHECK(state.log_likelihood_trace[t] >= state.log_likelihood_trace[t - 1] - 1e-9);
}

}  // namespace

TEST_CASE("smallest instance converges with a non-decreasing likelihood") {
    const auto responses = test::responses_from({"1"});
    const auto q = test::qmatrix_from({"1"});
    const auto cells = responses.observed_cells();
    const auto state = em_fit(responses, q, cells, {}, RandomSource(0));
    check_monotone_trace(state);
    const auto p = em_predict(state, responses, q, cells, cells);
    REQUIRE(p.size() == 1);
    CHECK(p[0] > 0.9);  // a single correct answer drives the fit towards 1
}

TEST_CASE("likelihood is non-decreasing on random instances") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        GenerativeSpec spec;
        spec.students = 40;
        spec.questions = 8;
        spec.skills = 3;
        spec.slip.base = 0.2;
        spec.guess.base = 0.2;
        spec.seed = seed;
        const auto data = generate(spec);
        const auto cells = data.responses.observed_cells();
        EmConfig config;
        config.max_iter = 60;
        const auto state = em_fit(data.responses, data.q, cells, config, RandomSource(seed));
        check_monotone_trace(state);
        const double total =
            std::accumulate(state.class_priors.begin(), state.class_priors.end(), 0.0);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("known rates are recovered on synthetic data") {
    GenerativeSpec spec;
    spec.students = 500;
    spec.questions = 16;
    spec.skills = 4;
    spec.q_density = 0.35;
    spec.slip.base = 0.1;
    spec.guess.base = 0.1;
    spec.seed = 33;
    const auto data = generate(spec);
    const auto cells = data.responses.observed_cells();
    const auto state = em_fit(data.responses, data.q, cells, {}, RandomSource(33));
    double slip_error = 0, guess_error = 0;
    for (std::size_t j = 0; j < data.q.question_count(); ++j) {
        slip_error += std::abs(state.slip[j] - 0.1);
        guess_error += std::abs(state.guess[j] - 0.1);
    }
    CHECK(slip_error / data.q.question_count() <= 0.05);
    CHECK(guess_error / data.q.question_count() <= 0.05);
}

TEST_CASE("MAP profiles reproduce noise-free training responses") {
    GenerativeSpec spec;
    spec.students = 60;
    spec.questions = 12;
    spec.skills = 3;
    spec.q_density = 0.5;
    spec.seed = 7;
    const auto data = generate(spec);
    const auto cells = data.responses.observed_cells();
    const auto state = em_fit(data.responses, data.q, cells, {}, RandomSource(7));
    const auto profiles = em_map_profiles(state, data.responses, data.q, cells);
    for (const auto& cell : cells) {
        REQUIRE(profiles[cell.student].has_value());
        const auto xi = ideal_response(*profiles[cell.student], data.q.rows[cell.question]);
        const auto observed = data.responses.at(cell.student, cell.question) == Cell::Correct;
        CHECK(xi == observed);
    }
}

TEST_CASE("uniform posterior with half rates predicts one half") {
    EmState state;
    state.skill_count = 2;
    state.class_priors.assign(4, 0.25);
    state.slip.assign(2, 0.5);
    state.guess.assign(2, 0.5);
    const auto responses = test::responses_from({"11"});
    const auto q = test::qmatrix_from({"10", "01"});
    // No training cells: the posterior equals the prior.
    const std::vector<CellRef> none;
    const std::vector<CellRef> targets{{0, 0}, {0, 1}};
    const auto p = em_predict(state, responses, q, none, targets);
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
}

TEST_CASE("unseen students get the prior-weighted prediction") {
    EmState state;
    state.skill_count = 1;
    state.class_priors = {0.25, 0.75};
    state.slip = {0.1};
    state.guess = {0.2};
    const auto responses = test::responses_from({"1"});
    const auto q = test::qmatrix_from({"1"});
    const std::vector<CellRef> none;
    const std::vector<CellRef> targets{{0, 0}};
    const auto p = em_predict(state, responses, q, none, targets);
    CHECK(p[0] == doctest::Approx(0.75 * 0.9 + 0.25 * 0.2));
}

TEST_CASE("identity Q-matrices take the factorized path") {
    const auto q = test::qmatrix_from({"10", "01"});
    CHECK(factorizable(q));
    CHECK_FALSE(factorizable(test::qmatrix_from({"11", "01"})));

    // Four unit-row questions per skill keep the two-class mixtures
    // identifiable.
    GenerativeSpec spec;
    spec.students = 400;
    spec.questions = 12;
    spec.skills = 3;
    spec.slip.base = 0.1;
    spec.guess.base = 0.1;
    spec.seed = 13;
    auto data = generate(spec);
    std::vector<BitVec> rows(12, BitVec(3, 0));
    for (std::size_t j = 0; j < 12; ++j) rows[j][j % 3] = 1;
    data.q = make_qmatrix(rows, data.q.question_ids, data.q.skill_ids);
    // Regenerate outcomes under the unit-row Q.
    RandomSource noise(99);
    for (std::size_t i = 0; i < spec.students; ++i)
        for (std::size_t j = 0; j < 12; ++j) {
            const bool xi = data.profiles[i].bits[j % 3];
            const bool correct = xi ? !noise.bernoulli(0.1) : noise.bernoulli(0.1);
            data.responses.set(i, j, correct ? Cell::Correct : Cell::Incorrect);
        }
    const auto cells = data.responses.observed_cells();
    const auto state = em_fit(data.responses, data.q, cells, {}, RandomSource(13));
    CHECK(state.factorized);
    check_monotone_trace(state);
    double slip_error = 0;
    for (std::size_t j = 0; j < 12; ++j) slip_error += std::abs(state.slip[j] - 0.1);
    CHECK(slip_error / 12 <= 0.05);
}

TEST_CASE("an oversized non-factorizable K is rejected with guidance") {
    std::vector<BitVec> rows;
    std::vector<std::string> ids;
    for (int j = 0; j < 17; ++j) {
        BitVec row(16, 0);
        row[j % 16] = 1;
        if (j == 16) row[0] = row[1] = 1;  // break factorizability
        rows.push_back(row);
        ids.push_back("q" + std::to_string(j));
    }
    const auto q = make_qmatrix(rows, ids, synthetic_skill_ids(16));
    const auto responses = test::responses_from({std::string(17, '1')});
    const auto cells = responses.observed_cells();
    CHECK_THROWS_AS(em_fit(responses, q, cells, {}, RandomSource(0)), ConfigError);
}

TEST_CASE("worker count does not change the fit") {
    GenerativeSpec spec;
    spec.students = 120;
    spec.questions = 10;
    spec.skills = 3;
    spec.slip.base = 0.15;
    spec.guess.base = 0.15;
    spec.seed = 3;
    const auto data = generate(spec);
    const auto cells = data.responses.observed_cells();
    EmConfig one;
    one.max_iter = 40;
    EmConfig four = one;
    four.workers = 4;
    const auto a = em_fit(data.responses, data.q, cells, one, RandomSource(3));
    const auto b = em_fit(data.responses, data.q, cells, four, RandomSource(3));
    CHECK(a.slip == b.slip);
    CHECK(a.guess == b.guess);
    CHECK(a.class_priors == b.class_priors);
    CHECK(a.log_likelihood_trace == b.log_likelihood_trace);
}
