#include <benchmark/benchmark.h>

#include "cogdiag/dataset.hpp"
#include "cogdiag/dina_em.hpp"
#include "cogdiag/esve.hpp"
#include "cogdiag/hbca.hpp"
#include "cogdiag/predict.hpp"
#include "cogdiag/synth.hpp"

namespace {

using namespace cogdiag;

GeneratedData make_instance(std::size_t students, std::size_t questions, std::size_t skills) {
    GenerativeSpec spec;
    spec.students = students;
    spec.questions = questions;
    spec.skills = skills;
    spec.q_density = 0.35;
    spec.slip.base = 0.1;
    spec.guess.base = 0.15;
    spec.seed = 42;
    return generate(spec);
}

void BM_EsveSolveAll(benchmark::State& state) {
    const auto data = make_instance(static_cast<std::size_t>(state.range(0)), 20, 6);
    const auto cells = data.responses.observed_cells();
    for (auto _ : state) {
        auto results = esve_solve_all(data.responses, data.q, cells, RandomSource(1));
        benchmark::DoNotOptimize(results);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EsveSolveAll)->Arg(100)->Arg(500)->Arg(2000);

void BM_EstimateSd(benchmark::State& state) {
    const auto data = make_instance(static_cast<std::size_t>(state.range(0)), 20, 6);
    const auto cells = data.responses.observed_cells();
    const auto results = esve_solve_all(data.responses, data.q, cells, RandomSource(1));
    for (auto _ : state) {
        auto table = estimate_sd(results, data.responses, data.q, cells);
        benchmark::DoNotOptimize(table);
    }
}
BENCHMARK(BM_EstimateSd)->Arg(500)->Arg(2000);

void BM_EmFit(benchmark::State& state) {
    const auto data = make_instance(300, 16, static_cast<std::size_t>(state.range(0)));
    const auto cells = data.responses.observed_cells();
    EmConfig config;
    config.max_iter = 25;
    config.tol = 0.0;  // fixed iteration count for a stable measurement
    for (auto _ : state) {
        auto fitted = em_fit(data.responses, data.q, cells, config, RandomSource(1));
        benchmark::DoNotOptimize(fitted);
    }
}
BENCHMARK(BM_EmFit)->Arg(4)->Arg(8)->Arg(10);

void BM_CoveringGraph(benchmark::State& state) {
    const auto data = make_instance(static_cast<std::size_t>(state.range(0)), 30, 6);
    const auto cells = data.responses.observed_cells();
    for (auto _ : state) {
        auto graph = build_covering_graph(data.responses, cells, 0.8);
        benchmark::DoNotOptimize(graph);
    }
}
BENCHMARK(BM_CoveringGraph)->Arg(500)->Arg(2000);

void BM_QstInit(benchmark::State& state) {
    const auto data = make_instance(500, 30, 6);
    const auto cells = data.responses.observed_cells();
    const auto graph = build_covering_graph(data.responses, cells, 0.8);
    RandomSource rng(7);
    for (auto _ : state) {
        auto q = qst_init(graph, static_cast<int>(state.range(0)), 0.2, 0.35, rng);
        benchmark::DoNotOptimize(q);
    }
}
BENCHMARK(BM_QstInit)->Arg(5)->Arg(9);

void BM_DaSolve(benchmark::State& state) {
    const auto data = make_instance(static_cast<std::size_t>(state.range(0)), 12, 4);
    const auto cells = data.responses.observed_cells();
    const auto results = esve_solve_all(data.responses, data.q, cells, RandomSource(1));
    const auto profiles = extract_profiles(results);
    RandomSource rng(9);
    for (auto _ : state) {
        for (std::size_t j = 0; j < data.q.question_count(); ++j) {
            auto row = da_solve(j, profiles, data.responses, cells, 100, rng);
            benchmark::DoNotOptimize(row);
        }
    }
    state.SetItemsProcessed(state.iterations() * data.q.question_count());
}
BENCHMARK(BM_DaSolve)->Arg(200)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
