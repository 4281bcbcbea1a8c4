#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "enor/kernel.hpp"
#include "enor/solver.hpp"

#include "fixtures.hpp"

using namespace enor;

namespace {

NonlocalOperator make_operator(double length, int degree) {
    const SolverGrid g = SolverGrid::make(length, 0.05, 0.02, 1.2);
    const auto targets = support::periodic_targets();
    const KernelCoeffs k =
        eliminate_constraints(minimum_norm_free(targets, degree, 1.2, 0.05), targets, degree, 1.2, 0.05);
    return NonlocalOperator(g, k);
}

void BM_Apply(benchmark::State& state) {
    const NonlocalOperator op = make_operator(static_cast<double>(state.range(0)), 24);
    const auto n = static_cast<std::size_t>(op.grid().points());
    std::vector<double> u(n), out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) u[i] = std::sin(0.3 * static_cast<double>(i));
    for (auto _ : state) {
        op.apply(u.data(), out.data());
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_Apply)->Arg(20)->Arg(80)->Arg(300);

void BM_StepAccumulated(benchmark::State& state) {
    const NonlocalOperator op = make_operator(20.0, static_cast<int>(state.range(0)));
    const auto n = static_cast<std::size_t>(op.grid().points());
    std::vector<double> prev(n, 0.0), cur(n), next(n, 0.0), force(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) cur[i] = 1e-3 * std::cos(0.2 * static_cast<double>(i));
    for (auto _ : state) {
        step_accumulated(op, cur.data(), prev.data(), force.data(), next.data());
        benchmark::DoNotOptimize(next.data());
    }
}
BENCHMARK(BM_StepAccumulated)->Arg(8)->Arg(24);

}  // namespace
