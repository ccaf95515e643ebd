#include <benchmark/benchmark.h>

#include "sentisim/experiments.hpp"
#include "sentisim/market.hpp"

using namespace sentisim;

static void bm_simulate_markov(benchmark::State& state) {
    const long steps = state.range(0);
    std::uint64_t seed = 1;
    for (auto _ : state) {
        auto config = experiments::markov_market_config(seed++, steps);
        benchmark::DoNotOptimize(market::simulate(config));
    }
    state.SetItemsProcessed(state.iterations() * steps);
}
BENCHMARK(bm_simulate_markov)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

static void bm_generate_and_match_step(benchmark::State& state) {
    auto config = experiments::markov_market_config(7, 10);
    market::Simulator sim(config);
    long t = 2;
    for (auto _ : state) {
        if (t > 10) {
            state.PauseTiming();
            sim = market::Simulator(config);
            t = 2;
            state.ResumeTiming();
        }
        benchmark::DoNotOptimize(sim.run_step(t++));
    }
}
BENCHMARK(bm_generate_and_match_step);

BENCHMARK_MAIN();
