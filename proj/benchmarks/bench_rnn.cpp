#include <benchmark/benchmark.h>

#include "sentisim/rng.hpp"
#include "sentisim/rnn.hpp"

using namespace sentisim;

namespace {

rnn::Chunk bench_chunk(int memory_dim, long steps) {
    Rng rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    rnn::Chunk chunk;
    chunk.inputs.resize(steps, 2);
    for (long t = 0; t < steps; ++t) {
        chunk.inputs(t, 0) = gauss(rng);
        chunk.inputs(t, 1) = 0.02 * gauss(rng);
    }
    chunk.targets.resize(steps);
    std::uniform_int_distribution<int> classes(0, 2);
    for (auto& target : chunk.targets) target = classes(rng);
    chunk.m0 = Eigen::VectorXd::Zero(memory_dim);
    return chunk;
}

}  // namespace

static void bm_forward(benchmark::State& state) {
    Rng rng(1);
    const auto params = rnn::RnnParams::init(2, state.range(0), 3, rng);
    const auto chunk = bench_chunk(state.range(0), 50);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rnn::forward(params, chunk));
    }
    state.SetItemsProcessed(state.iterations() * 50);
}
BENCHMARK(bm_forward)->Arg(50)->Arg(200);

static void bm_forward_backward_update(benchmark::State& state) {
    Rng rng(1);
    auto params = rnn::RnnParams::init(2, state.range(0), 3, rng);
    auto cache = rnn::AdagradCache::zeros_like(params);
    const auto chunk = bench_chunk(state.range(0), 50);
    for (auto _ : state) {
        const auto fwd = rnn::forward(params, chunk);
        const auto grads = rnn::backward(params, chunk, fwd);
        rnn::adagrad_update(params, cache, grads);
        benchmark::DoNotOptimize(params);
    }
    state.SetItemsProcessed(state.iterations() * 50);
}
BENCHMARK(bm_forward_backward_update)->Arg(50)->Arg(200);
