#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "enor/error.hpp"
#include "enor/kle.hpp"
#include "enor/nor_fit.hpp"
#include "enor/rng.hpp"

#include "fixtures.hpp"

using namespace enor;

namespace {

constexpr int kDegree = 10;

struct Synthetic {
    PhysicsTargets targets = support::periodic_targets();
    WaveDataset dns = support::small_dataset(10.0, 1.0);
    Eigen::VectorXd truth;
    WaveDataset data;

    Synthetic() {
        truth = minimum_norm_free(targets, kDegree, 1.2, 0.05);
        Rng rng = make_rng(17);
        std::normal_distribution<double> d(0.0, 0.05 * truth.cwiseAbs().maxCoeff());
        for (auto& v : truth) v += d(rng);
        data = support::synthetic_dataset(dns, kDegree, 1.2, targets, truth);
    }
};

const Synthetic& synthetic() {
    static const Synthetic s;
    return s;
}

}  // namespace

TEST(NorObjective, ZeroMisfitAtGeneratingKernel) {
    const auto& s = synthetic();
    CalibrationProblem p(s.data, kDegree, 1.2, s.targets);
    const double lambda = 1e-3;
    const double full_norm = p.full_coefficients(s.truth).squaredNorm();
    EXPECT_NEAR(nor_objective(p, s.truth, lambda), lambda * full_norm, 1e-12 * lambda * full_norm);
    EXPECT_LE(nor_objective(p, s.truth, 0.0), 1e-24);
}

TEST(NorObjective, InvariantUnderScenarioRelabeling) {
    const auto& s = synthetic();
    CalibrationProblem p(s.dns, kDegree, 1.2, s.targets);
    WaveDataset rev = s.dns;
    std::reverse(rev.scenarios.begin(), rev.scenarios.end());
    std::reverse(rev.u.begin(), rev.u.end());
    CalibrationProblem q(rev, kDegree, 1.2, s.targets);
    const double a = nor_objective(p, s.truth, 1e-6), b = nor_objective(q, s.truth, 1e-6);
    EXPECT_NEAR(a, b, 1e-12 * a);
}

TEST(NorObjective, AdjointGradientMatchesFiniteDifferences) {
    const auto& s = synthetic();
    CalibrationProblem p(s.dns, kDegree, 1.2, s.targets);
    Rng rng = make_rng(2);
    std::normal_distribution<double> d(0.0, 0.02);
    for (int trial = 0; trial < 3; ++trial) {
        Eigen::VectorXd x = s.truth;
        for (auto& v : x) v *= 1.0 + d(rng);
        Eigen::VectorXd g;
        nor_objective(p, x, 1e-6, &g);
        const Eigen::VectorXd fd = nor_gradient_fd(p, x, 1e-6, 1e-6 * x.cwiseAbs().maxCoeff());
        EXPECT_LE((g - fd).norm(), 1e-4 * fd.norm());
    }
}

TEST(NorFit, ReproducesModelGeneratedData) {
    // Two single-wavenumber scenarios probe only part of the dispersion relation, so the
    // M = 10 coefficients are not identifiable; the fitted rollouts must still match.
    const auto& s = synthetic();
    CalibrationProblem p(s.data, kDegree, 1.2, s.targets);
    FitConfig cfg;
    cfg.lambda = 0.0;
    const Eigen::VectorXd start = minimum_norm_free(s.targets, kDegree, 1.2, 0.05);
    const double f0 = nor_objective(p, start, 0.0);
    const FitResult r = fit_nor(p, cfg, start);
    // Normalized misfit: 1e-8 is a relative RMS rollout error of 1e-4.
    EXPECT_LE(r.loss, 1e-3 * f0);
    EXPECT_LE(r.loss, 1e-8);
    EXPECT_LE(constraint_residuals(r.kernel).cwiseAbs().maxCoeff(), 1e-10);
    ASSERT_FALSE(r.loss_history.empty());
    for (std::size_t k = 1; k < r.loss_history.size(); ++k) EXPECT_LE(r.loss_history[k], r.loss_history[k - 1]);
    const NonlocalOperator op(p.grid(), p.stencil(r.free));
    const auto b = p.grid().interior_begin();
    const auto n = p.grid().interior_size();
    for (std::size_t sc = 0; sc < p.scenario_count(); ++sc) {
        const Field u = p.rollout(op, sc);
        const Field& d = p.data(sc);
        EXPECT_LE((u.middleCols(b, n) - d.middleCols(b, n)).cwiseAbs().maxCoeff(),
                  1e-3 * d.middleCols(b, n).cwiseAbs().maxCoeff());
    }
}

TEST(NorFit, RecoversLowDegreeKernel) {
    constexpr int degree = 4;
    const PhysicsTargets tg = support::periodic_targets();
    const WaveDataset dns = support::small_dataset(10.0, 1.0);
    Eigen::VectorXd truth = minimum_norm_free(tg, degree, 1.2, 0.05);
    Rng rng = make_rng(23);
    std::normal_distribution<double> d(0.0, 0.05 * truth.cwiseAbs().maxCoeff());
    for (auto& v : truth) v += d(rng);
    const WaveDataset data = support::synthetic_dataset(dns, degree, 1.2, tg, truth);
    CalibrationProblem p(data, degree, 1.2, tg);
    FitConfig cfg;
    cfg.lambda = 0.0;
    const FitResult r = fit_nor(p, cfg);
    const Eigen::VectorXd cfit = p.full_coefficients(r.free), ctrue = p.full_coefficients(truth);
    EXPECT_LE((cfit - ctrue).norm() / ctrue.norm(), 1e-4);
}

TEST(NorFit, FiniteDifferenceModeAlsoDescends) {
    const auto& s = synthetic();
    CalibrationProblem p(s.dns, kDegree, 1.2, s.targets);
    FitConfig cfg;
    cfg.adjoint = false;
    cfg.max_iterations = 5;
    const double f0 = nor_objective(p, minimum_norm_free(s.targets, kDegree, 1.2, 0.05), cfg.lambda);
    const FitResult r = fit_nor(p, cfg);
    EXPECT_LT(r.loss, f0);
}

TEST(NorFit, StrongRegularizationShrinksFreeCoefficients) {
    const auto& s = synthetic();
    CalibrationProblem p(s.dns, kDegree, 1.2, s.targets);
    FitConfig weak, strong;
    weak.lambda = 1e-8;
    strong.lambda = 1e2;
    const FitResult a = fit_nor(p, weak), b = fit_nor(p, strong);
    EXPECT_LT(b.free.norm(), a.free.norm());
    EXPECT_LE(constraint_residuals(b.kernel).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitConfig, RejectsNegativeLambda) {
    FitConfig c;
    c.lambda = -1.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(SigmaInit, ZeroGammaDrivesSigmaToLowerBracket) {
    const auto& s = synthetic();
    CalibrationProblem p(s.data, kDegree, 1.2, s.targets);
    const KLEBasis b = build_basis(5.0, 10.0);
    const Eigen::MatrixXd modes = half_grid_modes(b, p.grid());
    Rng rng = make_rng(8);
    std::normal_distribution<double> d;
    Eigen::MatrixXd xi(8, b.terms());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi.data()[i] = d(rng);
    const double lo = std::log(1e-4), hi = 0.0;
    const SigmaInit r = init_sigma_gp(p, s.truth, 0.0, modes, xi, lo, hi, 16);
    EXPECT_LT(r.ln_sigma, lo + 0.1 * (hi - lo));
    EXPECT_EQ(r.evaluations.size(), 16u);
}

TEST(SigmaInit, GoldenSectionFindsScanMinimum) {
    const auto& s = synthetic();
    CalibrationProblem p(s.dns, kDegree, 1.2, s.targets);
    const KLEBasis b = build_basis(5.0, 10.0);
    const Eigen::MatrixXd modes = half_grid_modes(b, p.grid());
    Rng rng = make_rng(9);
    std::normal_distribution<double> d;
    Eigen::MatrixXd xi(8, b.terms());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi.data()[i] = d(rng);
    const Eigen::VectorXd c0 = minimum_norm_free(s.targets, kDegree, 1.2, 0.05);
    const double lo = std::log(1e-4), hi = 0.0;
    const SigmaInit r = init_sigma_gp(p, c0, 1.0, modes, xi, lo, hi, 16);
    // Oracle: dense scan of the same objective.
    auto objective = [&](double ls) {
        const EnsembleMoments m = fine_moments(p, c0, std::exp(ls), modes, xi);
        double v = 0.0;
        for (std::size_t k = 0; k < p.scenario_count(); ++k) v += abc_misfit(p.grid(), m.mean[k], m.sd[k], p.data(k), 1.0);
        return v;
    };
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= 40; ++j) best = std::min(best, objective(lo + (hi - lo) * j / 40.0));
    EXPECT_LE(r.objective, best * (1.0 + 1e-3));
    EXPECT_NEAR(objective(r.ln_sigma), r.objective, 1e-9 * r.objective);
}

TEST(NorProblem, RejectsScenarioWithoutInteriorSignal) {
    MaterialSpec mat;
    mat.length = 10.0;
    DnsOptions o;
    o.final_time = 1.0;
    const WaveDataset d = generate_dataset(mat, {LoadingScenario::plane_wave_ramp(1.05, 10.0)}, o, 1);
    EXPECT_THROW(CalibrationProblem(d, kDegree, 1.2, support::periodic_targets()), InvalidArgument);
}

TEST(NorObjective, AdjointGradientWithInflowCollar) {
    const PhysicsTargets tg = support::periodic_targets();
    const WaveDataset dns = support::small_dataset(10.0, 3.0);
    ASSERT_EQ(dns.scenario_count(), 3u);
    CalibrationProblem p(dns, kDegree, 1.2, tg);
    Eigen::VectorXd x = minimum_norm_free(tg, kDegree, 1.2, 0.05);
    Rng rng = make_rng(5);
    std::normal_distribution<double> d(0.0, 0.02);
    for (auto& v : x) v *= 1.0 + d(rng);
    Eigen::VectorXd g;
    const double f = nor_objective(p, x, 1e-6, &g);
    ASSERT_TRUE(std::isfinite(f));
    const Eigen::VectorXd fd = nor_gradient_fd(p, x, 1e-6, 1e-6 * x.cwiseAbs().maxCoeff());
    EXPECT_LE((g - fd).norm(), 1e-4 * fd.norm());
}
