#include <benchmark/benchmark.h>

#include "enor/diagnostics.hpp"

#include "fixtures.hpp"

using namespace enor;

namespace {

void BM_Crps(benchmark::State& state) {
    const auto x = support::normal_samples(static_cast<int>(state.range(0)), 5);
    for (auto _ : state) benchmark::DoNotOptimize(crps(x, 0.1));
}
BENCHMARK(BM_Crps)->Arg(1000)->Arg(100000);

void BM_CrpsPwm(benchmark::State& state) {
    const auto x = support::normal_samples(static_cast<int>(state.range(0)), 5);
    for (auto _ : state) benchmark::DoNotOptimize(crps_pwm(x, 0.1));
}
BENCHMARK(BM_CrpsPwm)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
