#include <benchmark/benchmark.h>

#include "sentisim/experiments.hpp"
#include "sentisim/hmm.hpp"
#include "sentisim/rng.hpp"

using namespace sentisim;

namespace {

hmm::HmmModel bench_model() {
    hmm::HmmModel model;
    model.n_hidden = 3;
    model.n_obs = 9;
    model.A = experiments::demo_transition_matrix();
    model.B.setZero(3, 9);
    for (int i = 0; i < 3; ++i) {
        model.B(i, 3 * i) = 0.2;
        model.B(i, 3 * i + 1) = 0.6;
        model.B(i, 3 * i + 2) = 0.2;
    }
    model.pi = Eigen::Vector3d::Constant(1.0 / 3.0);
    return model;
}

std::vector<int> bench_obs(long length) {
    Rng rng(5);
    return hmm::hmm_sample(bench_model(), length, rng).second;
}

}  // namespace

static void bm_forward_backward(benchmark::State& state) {
    const auto model = bench_model();
    const auto obs = bench_obs(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(hmm::forward_backward(model, obs));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_forward_backward)->Arg(1000)->Arg(5000);

static void bm_baum_welch_step(benchmark::State& state) {
    const auto model = bench_model();
    const auto obs = bench_obs(1000);
    for (auto _ : state) {
        benchmark::DoNotOptimize(hmm::baum_welch_step(model, obs));
    }
}
BENCHMARK(bm_baum_welch_step);

static void bm_baum_welch_fit(benchmark::State& state) {
    const auto obs = bench_obs(1000);
    std::uint64_t seed = 0;
    for (auto _ : state) {
        Rng rng(seed++);
        benchmark::DoNotOptimize(hmm::baum_welch(obs, 3, 9, hmm::BaumWelchOptions{}, rng));
    }
}
BENCHMARK(bm_baum_welch_fit)->Unit(benchmark::kMillisecond);

static void bm_viterbi(benchmark::State& state) {
    const auto model = bench_model();
    const auto obs = bench_obs(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(hmm::viterbi(model, obs));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_viterbi)->Arg(1000)->Arg(5000);
