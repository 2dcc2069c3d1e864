#include <benchmark/benchmark.h>

#include <random>

#include "qpk/dsp.hpp"
#include "qpk/trigger.hpp"

using namespace qpk;

namespace {

std::vector<double> noise(std::size_t n) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    std::vector<double> x(n);
    for (auto& v : x) v = g(rng);
    return x;
}

void BM_Bandpass(benchmark::State& state) {
    const auto x = noise(static_cast<std::size_t>(state.range(0)));
    std::vector<double> y(x.size());
    dsp::BandpassFilter f({2.5, 5.0, 4}, 100.0);
    for (auto _ : state) {
        f.process(x, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Bandpass)->Arg(6000)->Arg(360000);

// Samples per second through the three-band characteristic function and trigger rule.
void BM_TriggerFeed(benchmark::State& state) {
    const auto x = noise(static_cast<std::size_t>(state.range(0)));
    const TriggerConfig cfg;
    for (auto _ : state) {
        TriggerDetector det(cfg, "ST01", 100.0, 0);
        benchmark::DoNotOptimize(det.feed(x));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TriggerFeed)->Arg(6000)->Arg(360000);

}  // namespace
