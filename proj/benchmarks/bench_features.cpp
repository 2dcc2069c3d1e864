#include <benchmark/benchmark.h>

#include <random>

#include "qpk/features.hpp"

using namespace qpk;

namespace {

TriTrace window_trace(double post_s) {
    FeatureConfig cfg;
    cfg.post_s = post_s;
    const auto n = window_samples(cfg, 100.0);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    std::vector<double> e(n), nn(n), z(n);
    for (std::size_t i = 0; i < n; ++i) {
        e[i] = g(rng);
        nn[i] = g(rng);
        z[i] = g(rng) * (i > n / 4 ? 5.0 : 1.0);
    }
    return TriTrace("ST01", 100.0, 0, std::move(e), std::move(nn), std::move(z));
}

// One candidate window to its full feature vector; argument is AN in seconds.
void BM_Assemble(benchmark::State& state) {
    FeatureConfig cfg;
    cfg.post_s = static_cast<double>(state.range(0));
    const FeatureExtractor fx(cfg);
    const auto win = window_trace(cfg.post_s);
    for (auto _ : state) benchmark::DoNotOptimize(fx.assemble(win));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Assemble)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_AssembleParallel(benchmark::State& state) {
    const FeatureExtractor fx(FeatureConfig{});
    const auto win = window_trace(20.0);
    for (auto _ : state) benchmark::DoNotOptimize(fx.assemble(win, true));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_AssembleParallel)->Unit(benchmark::kMillisecond);

}  // namespace
