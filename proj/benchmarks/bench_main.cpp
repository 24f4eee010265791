#include <benchmark/benchmark.h>

#include <random>

#include "driftdx/estimators.hpp"
#include "driftdx/learners.hpp"

using namespace driftdx;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = unif(rng);
    return v;
}

void BM_vstatistic(benchmark::State& state) {
    std::size_t n = static_cast<std::size_t>(state.range(0));
    std::vector<double> a = random_vec(n, 1), b = random_vec(n, 2);
    PairKernel k = [&](std::size_t i, std::size_t j) { return a[i] * b[j]; };
    for (auto _ : state) benchmark::DoNotOptimize(vstatistic(k, n));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_vstatistic)->Range(64, 4096)->Complexity(benchmark::oNSquared);

void BM_vstatistic_subsampled(benchmark::State& state) {
    std::size_t n = static_cast<std::size_t>(state.range(0));
    std::vector<double> a = random_vec(n, 3), b = random_vec(n, 4);
    PairKernel k = [&](std::size_t i, std::size_t j) { return a[i] * b[j]; };
    for (auto _ : state)
        benchmark::DoNotOptimize(vstatistic_subsampled(k, n, 100000, 5));
}
BENCHMARK(BM_vstatistic_subsampled)->Range(1024, 65536);

void BM_boosted_stumps_fit(benchmark::State& state) {
    std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(6);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix X(n, 4);
    for (auto& v : X.values) v = gauss(rng);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = (X.at(i, 0) > 0.5 ? 1.0 : 0.0) + 0.2 * gauss(rng);
    CvConfig cfg;
    cfg.folds = 5;
    cfg.seed = 7;
    for (auto _ : state) benchmark::DoNotOptimize(fit_regressor(X, y, cfg));
}
BENCHMARK(BM_boosted_stumps_fit)->Range(256, 4096)->Unit(benchmark::kMillisecond);

void BM_model_predict(benchmark::State& state) {
    Rng rng(8);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix X(2000, 4);
    for (auto& v : X.values) v = gauss(rng);
    std::vector<double> y(2000);
    for (std::size_t i = 0; i < 2000; ++i) y[i] = X.at(i, 0) + gauss(rng);
    CvConfig cfg;
    cfg.folds = 5;
    cfg.seed = 9;
    Model m = fit_regressor(X, y, cfg);
    for (auto _ : state) benchmark::DoNotOptimize(m.predict(X));
}
BENCHMARK(BM_model_predict);

}  // namespace

BENCHMARK_MAIN();
