#include <benchmark/benchmark.h>

#include <random>

#include "qpk/stacking.hpp"

using namespace qpk;

namespace {

// Two overlapping Gaussian classes in `d` dimensions.
Dataset blobs(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Dataset ds{Matrix(n, d), std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        ds.y[i] = i % 5 == 0;
        for (std::size_t j = 0; j < d; ++j) ds.x(i, j) = g(rng) + (ds.y[i] && j < 10 ? 1.5 : 0.0);
    }
    return ds;
}

std::vector<std::string> names(std::size_t d) {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < d; ++j) out.push_back("f" + std::to_string(j));
    return out;
}

const ModelBundle& bundle() {
    static const ModelBundle b = [] {
        const auto ds = blobs(400, 715, 1);
        return train_stack(ds, names(ds.dims()), StackConfig{});
    }();
    return b;
}

// Confidence of one 715-feature row through 9 base models and the meta-model.
void BM_Confidence(benchmark::State& state) {
    const auto& b = bundle();
    const auto rows = blobs(64, 715, 2);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(b.confidence(rows.x.row(i++ % rows.size()), static_cast<std::size_t>(state.range(0))));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Confidence)->Arg(1)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_FitBaseModel(benchmark::State& state) {
    const auto kind = kBaseModelKinds[static_cast<std::size_t>(state.range(0))];
    const auto ds = blobs(400, 100, 3);
    for (auto _ : state) benchmark::DoNotOptimize(fit(kind, ds, 1));
    state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_FitBaseModel)->DenseRange(0, 8)->Unit(benchmark::kMillisecond);

}  // namespace
