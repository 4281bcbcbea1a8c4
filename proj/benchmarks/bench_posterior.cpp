#include <benchmark/benchmark.h>

#include "enor/kernel.hpp"
#include "enor/posterior.hpp"

#include "fixtures.hpp"

using namespace enor;

namespace {

constexpr int kDegree = 24;

struct Rig {
    PhysicsTargets targets = support::periodic_targets();
    WaveDataset data = support::small_dataset(20.0, 2.0);
    Eigen::VectorXd c0 = minimum_norm_free(targets, kDegree, 1.2, 0.05);
    CalibrationProblem problem{data, kDegree, 1.2, targets};

    PosteriorSpec spec() const {
        PosteriorSpec s;
        s.prior_mean = c0;
        s.lgp = 10.0;
        s.ensemble_size = 30;
        s.aem_draws = 4;
        return s;
    }
};

const Rig& rig() {
    static const Rig r;
    return r;
}

void BM_CoarsePosterior(benchmark::State& state) {
    const Posterior post(rig().problem, rig().spec(), 7);
    const Eigen::VectorXd theta = post.theta(rig().c0, -5.0);
    for (auto _ : state) benchmark::DoNotOptimize(post.coarse(theta));
}
BENCHMARK(BM_CoarsePosterior)->Unit(benchmark::kMillisecond);

void BM_FinePosterior(benchmark::State& state) {
    const Posterior post(rig().problem, rig().spec(), 7);
    const Eigen::VectorXd theta = post.theta(rig().c0, -5.0);
    for (auto _ : state) benchmark::DoNotOptimize(post.fine(theta));
}
BENCHMARK(BM_FinePosterior)->Unit(benchmark::kMillisecond);

}  // namespace
