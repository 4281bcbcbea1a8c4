#include <cmath>
#include <limits>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "enor/error.hpp"
#include "enor/posterior.hpp"

#include "fixtures.hpp"

using namespace enor;

namespace {

constexpr int kDegree = 8;

struct World {
    PhysicsTargets targets = support::periodic_targets();
    WaveDataset dns = support::small_dataset(10.0, 1.0);
    Eigen::VectorXd c0 = minimum_norm_free(targets, kDegree, 1.2, 0.05);
    WaveDataset synthetic = support::synthetic_dataset(dns, kDegree, 1.2, targets, c0);
    CalibrationProblem real{dns, kDegree, 1.2, targets};
    CalibrationProblem perfect{synthetic, kDegree, 1.2, targets};

    PosteriorSpec spec(double lo = -9.21, double hi = 0.0) const {
        PosteriorSpec s;
        s.prior_mean = c0;
        s.lgp = 5.0;
        s.ensemble_size = 6;
        s.aem_draws = 6;
        s.ln_sigma_lo = lo;
        s.ln_sigma_hi = hi;
        return s;
    }
};

const World& world() {
    static const World w;
    return w;
}

}  // namespace

TEST(PosteriorSpec, Validation) {
    PosteriorSpec s = world().spec();
    EXPECT_NO_THROW(s.validate());
    EXPECT_NEAR(PosteriorSpec{.prior_mean = world().c0}.prior_std(), 0.1 * world().c0.cwiseAbs().maxCoeff(), 1e-15);
    s.ensemble_size = 1;
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = world().spec();
    s.ln_sigma_lo = 1.0;
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = world().spec();
    s.epsilon = 0.0;
    EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(Posterior, PriorTermVanishesAtPriorMean) {
    Posterior post(world().real, world().spec(), 7);
    EXPECT_EQ(post.prior_term(post.theta(world().c0, -3.0)), 0.0);
    Eigen::VectorXd c = world().c0;
    c(0) += 2.0 * post.spec().sigma_hat;
    EXPECT_NEAR(post.prior_term(post.theta(c, -3.0)), 2.0, 1e-12);
}

TEST(Posterior, OutOfBoundsIsInfinite) {
    Posterior post(world().real, world().spec(-5.0, -1.0), 7);
    EXPECT_TRUE(std::isinf(post.fine(post.theta(world().c0, -6.0))));
    EXPECT_TRUE(std::isinf(post.coarse(post.theta(world().c0, 0.5))));
    EXPECT_TRUE(std::isfinite(post.fine(post.theta(world().c0, -3.0))));
}

TEST(Posterior, PerfectModelHasZeroDataTerm) {
    Posterior post(world().perfect, world().spec(-80.0, 0.0), 7);
    const auto th = post.theta(world().c0, -79.0);
    EXPECT_LE(post.fine(th), 1e-20);
    EXPECT_LE(post.coarse_uncorrected(th), 1e-20);
}

TEST(Posterior, EpsilonScalingOfDataTerm) {
    PosteriorSpec a = world().spec(), b = a;
    b.epsilon = 2.0 * a.epsilon;
    Posterior pa(world().real, a, 7), pb(world().real, b, 7);
    Eigen::VectorXd c = world().c0;
    c(1) *= 1.01;
    const auto th = pa.theta(c, -2.0);
    const double da = pa.fine(th) - pa.prior_term(th), db = pb.fine(th) - pb.prior_term(th);
    EXPECT_NEAR(db, da / 4.0, 1e-12 * da);
    const double ca = pa.coarse(th) - pa.prior_term(th), cb = pb.coarse(th) - pb.prior_term(th);
    EXPECT_NEAR(cb, ca / 4.0, 1e-12 * ca);
}

TEST(Posterior, DeterministicGivenSeed) {
    Posterior p1(world().real, world().spec(), 7), p2(world().real, world().spec(), 7), p3(world().real, world().spec(), 8);
    const auto th = p1.theta(world().c0, -1.5);
    EXPECT_EQ(p1.fine(th), p1.fine(th));
    EXPECT_EQ(p1.fine(th), p2.fine(th));
    EXPECT_EQ(p1.coarse(th), p2.coarse(th));
    EXPECT_NE(p1.fine(th), p3.fine(th));
}

TEST(Posterior, InvariantUnderScenarioPermutation) {
    WaveDataset rev = world().dns;
    std::reverse(rev.scenarios.begin(), rev.scenarios.end());
    std::reverse(rev.u.begin(), rev.u.end());
    CalibrationProblem q(rev, kDegree, 1.2, world().targets);
    Posterior a(world().real, world().spec(), 7), b(q, world().spec(), 7);
    const auto th = a.theta(world().c0, -2.0);
    EXPECT_NEAR(a.fine(th), b.fine(th), 1e-11 * a.fine(th));
    EXPECT_NEAR(a.coarse(th), b.coarse(th), 1e-11 * a.coarse(th));
}

TEST(CoarseModel, ClosedFormMomentsMatchExplicitRealizations) {
    Posterior post(world().real, world().spec(), 3);
    const CalibrationProblem& p = world().real;
    const double sigma = 0.3;
    const EnsembleMoments cm = post.coarse_model().moments(world().c0, sigma);
    const auto K = post.xi_block().rows();
    for (std::size_t s = 0; s < p.scenario_count(); ++s) {
        Field sum = Field::Zero(p.frames(), p.grid().points()), sq = sum;
        std::vector<Field> r(K);
        for (Eigen::Index k = 0; k < K; ++k) {
            NonlocalOperator op(p.grid(), p.stencil(world().c0));
            op.set_correction(sample_field(post.half_modes(), sigma, post.xi_block().row(k).transpose()));
            r[k] = stepwise_prediction(op, p.data(s), p.forcing(s));
            sum += r[k];
        }
        const Field mean = sum / static_cast<double>(K);
        for (const auto& x : r) sq.array() += (x - mean).array().square();
        const Field sd = (sq / static_cast<double>(K - 1)).cwiseSqrt();
        const Eigen::Index b = p.grid().interior_begin(), w = p.grid().interior_size(), n = p.frames() - 2;
        const double scale = mean.block(2, b, n, w).cwiseAbs().maxCoeff();
        EXPECT_LE((cm.mean[s].block(2, b, n, w) - mean.block(2, b, n, w)).cwiseAbs().maxCoeff(), 1e-10 * scale);
        EXPECT_LE((cm.sd[s].block(2, b, n, w) - sd.block(2, b, n, w)).cwiseAbs().maxCoeff(), 1e-8 * scale);
        // Single realization path agrees with the explicit step-wise rollout.
        const auto one = post.coarse_model().realization(world().c0, sigma, post.xi_block().row(0).transpose());
        EXPECT_LE((one[s].block(2, b, n, w) - r[0].block(2, b, n, w)).cwiseAbs().maxCoeff(), 1e-10 * scale);
    }
}

TEST(CoarseModel, ZeroSigmaGivesZeroSpread) {
    Posterior post(world().real, world().spec(), 3);
    const EnsembleMoments cm = post.coarse_model().moments(world().c0, 0.0);
    for (const auto& sd : cm.sd) EXPECT_LE(sd.cwiseAbs().maxCoeff(), 1e-12);
    const EnsembleMoments fm = fine_moments(world().real, world().c0, 0.0, post.half_modes(), post.xi_block());
    NonlocalOperator op(world().real.grid(), world().real.stencil(world().c0));
    for (std::size_t s = 0; s < fm.sd.size(); ++s) {
        EXPECT_EQ(fm.sd[s].cwiseAbs().maxCoeff(), 0.0);
        EXPECT_LE((fm.mean[s] - world().real.rollout(op, s)).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Aem, VarianceClampedShapesAndDeterminism) {
    Posterior post(world().real, world().spec(-6.0, -1.0), 7);
    const AEMCorrection a = estimate_aem(post, 6, 11), b = estimate_aem(post, 6, 11);
    ASSERT_EQ(a.bias_mean.size(), world().real.scenario_count());
    EXPECT_EQ(a.draws + a.diverged, 6);
    for (std::size_t s = 0; s < a.bias_mean.size(); ++s) {
        EXPECT_EQ(a.bias_mean[s].rows(), world().real.frames());
        EXPECT_GE(a.bias_var[s].minCoeff(), 0.0);
        EXPECT_EQ((a.bias_mean[s] - b.bias_mean[s]).cwiseAbs().maxCoeff(), 0.0);
    }
    EXPECT_GE(a.clamp_fraction, 0.0);
    EXPECT_LE(a.clamp_fraction, 1.0);
}

TEST(Aem, PermutingScenariosPermutesBias) {
    WaveDataset rev = world().dns;
    std::reverse(rev.scenarios.begin(), rev.scenarios.end());
    std::reverse(rev.u.begin(), rev.u.end());
    CalibrationProblem q(rev, kDegree, 1.2, world().targets);
    Posterior a(world().real, world().spec(-6.0, -1.0), 7), b(q, world().spec(-6.0, -1.0), 7);
    const AEMCorrection ea = estimate_aem(a, 4, 5), eb = estimate_aem(b, 4, 5);
    const std::size_t n = ea.bias_mean.size();
    for (std::size_t s = 0; s < n; ++s)
        EXPECT_LE((ea.bias_mean[s] - eb.bias_mean[n - 1 - s]).cwiseAbs().maxCoeff(),
                  1e-12 * (1.0 + ea.bias_mean[s].cwiseAbs().maxCoeff()));
}

TEST(Aem, CorrectionImprovesCoarseFineMatchAtPriorMean) {
    Posterior post(world().real, world().spec(-6.0, -1.0), 7);
    post.set_aem(std::make_shared<const AEMCorrection>(estimate_aem(post, 20, 11)));
    const auto th = post.theta(world().c0, -3.5);
    const double fine = post.fine(th);
    EXPECT_LT(std::abs(post.coarse(th) - fine), std::abs(post.coarse_uncorrected(th) - fine));
    post.set_aem(nullptr);
    EXPECT_EQ(post.coarse(th), post.coarse_uncorrected(th));
}

TEST(BoundTuning, ReportsConsistentState) {
    Posterior post(world().real, world().spec(-9.21, 0.0), 7);
    const BoundTuning t = tune_bounds(post, 11, 4, 0.1, 3);
    EXPECT_LT(t.lo, t.hi);
    EXPECT_GE(t.rounds, 1);
    EXPECT_LE(t.rounds, 3);
    EXPECT_EQ(t.probes.size(), 4u);
    EXPECT_EQ(t.matched, t.max_relative_gap <= 0.1);
    EXPECT_EQ(post.spec().ln_sigma_lo, t.lo);
    EXPECT_EQ(post.aem(), t.aem.get());
}

TEST(PosteriorSpec, JsonRoundTrip) {
    const PosteriorSpec s = world().spec();
    const nlohmann::json j = s;
    const auto b = j.get<PosteriorSpec>();
    EXPECT_EQ(b.epsilon, s.epsilon);
    EXPECT_EQ((b.prior_mean - s.prior_mean).norm(), 0.0);
    EXPECT_EQ(b.ensemble_size, s.ensemble_size);
}
