#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "enor/diagnostics.hpp"
#include "enor/error.hpp"

#include "fixtures.hpp"

using namespace enor;

namespace {

// Oracle: direct double loop over all ordered pairs.
double crps_pairs(const std::vector<double>& x, double y) {
    const double k = static_cast<double>(x.size());
    double a = 0.0, b = 0.0;
    for (double xi : x) a += std::abs(xi - y);
    for (double xi : x)
        for (double xj : x) b += std::abs(xi - xj);
    return a / k - 0.5 * b / (k * k);
}

Trace make_trace(const std::vector<Eigen::VectorXd>& draws) {
    Trace t;
    for (const auto& d : draws) t.push(d, 0.0, true, Level::Fine);
    return t;
}

}  // namespace

TEST(Rhat, IidChainsNearOne) {
    const auto a = support::normal_samples(10000, 1), b = support::normal_samples(10000, 2);
    const Statistic r = rhat({a, b});
    ASSERT_TRUE(r.defined);
    EXPECT_GE(r.value, 0.999);
    EXPECT_LE(r.value, 1.01);
    const Statistic same = rhat({a, a});
    EXPECT_GE(same.value, 0.999);
    EXPECT_LE(same.value, 1.01);
}

TEST(Rhat, DisjointChainsFarAboveThreshold) {
    const auto a = support::normal_samples(2000, 3, 0.0), b = support::normal_samples(2000, 4, 10.0);
    EXPECT_GT(rhat({a, b}).value, 1.5);
}

TEST(Rhat, InvariantUnderMonotoneTransform) {
    auto a = support::normal_samples(1000, 5), b = support::normal_samples(1000, 6, 0.3);
    const double r0 = rhat({a, b}).value;
    for (auto* v : {&a, &b})
        for (auto& x : *v) x = std::exp(x);
    EXPECT_NEAR(rhat({a, b}).value, r0, 1e-12);
}

TEST(Rhat, FoldedDetectsScaleDifference) {
    const auto a = support::normal_samples(4000, 7, 0.0, 1.0), b = support::normal_samples(4000, 8, 0.0, 4.0);
    EXPECT_LT(rhat({a, b}).value, 1.05);
    EXPECT_GT(rhat_folded({a, b}).value, 1.1);
}

TEST(Rhat, DegenerateInputs) {
    std::vector<double> c(100, 2.0);
    EXPECT_FALSE(rhat({c, c}).defined);
    EXPECT_THROW(rhat({{1.0, 2.0, 3.0}}), InvalidArgument);
    EXPECT_THROW(rhat({std::vector<double>(10, 0.0), std::vector<double>(12, 0.0)}), InvalidArgument);
}

TEST(Rhat, SplitDetectsTrendWithinOneChain) {
    std::vector<double> drift(2000);
    for (std::size_t i = 0; i < drift.size(); ++i) drift[i] = static_cast<double>(i) / 100.0;
    EXPECT_GT(rhat({drift}).value, 1.5);
}

TEST(Ess, IidChainWithinTenPercent) {
    const auto a = support::normal_samples(20000, 9);
    const Statistic e = ess({a});
    ASSERT_TRUE(e.defined);
    EXPECT_NEAR(e.value, 20000.0, 2000.0);
}

TEST(Ess, Ar1MatchesAnalyticRatio) {
    for (double rho : {0.5, 0.9}) {
        const int n = 100000;
        const auto a = support::ar1(n, rho, 10);
        const double expected = (1.0 - rho) / (1.0 + rho);
        EXPECT_NEAR(ess({a}).value / n, expected, 0.15 * expected) << "rho=" << rho;
    }
}

TEST(Ess, ConstantChainUndefined) { EXPECT_FALSE(ess({std::vector<double>(100, 1.0)}).defined); }

TEST(Ess, PoolsChains) {
    const auto a = support::normal_samples(5000, 11), b = support::normal_samples(5000, 12);
    EXPECT_NEAR(ess({a, b}).value, 10000.0, 1000.0);
}

TEST(Crps, Examples) {
    EXPECT_NEAR(crps({0.0, 2.0}, 1.0), 0.5, 1e-15);
    EXPECT_EQ(crps({3.0, 3.0, 3.0}, 3.0), 0.0);
    EXPECT_NEAR(crps({1.0, 2.0, 4.0}, 0.0), crps_pairs({1.0, 2.0, 4.0}, 0.0), 1e-15);
}

TEST(Crps, GaussianClosedForm) {
    const auto x = support::normal_samples(100000, 13);
    EXPECT_NEAR(crps(x, 0.0), (std::sqrt(2.0) - 1.0) / std::sqrt(std::numbers::pi), 0.005);
}

TEST(Crps, AllPairsEqualsProbabilityWeightedForm) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto x = support::normal_samples(50 + static_cast<int>(seed) * 7, seed + 100, 0.3, 2.0);
        const double y = 0.1 * static_cast<double>(seed);
        const double a = crps(x, y), b = crps_pwm(x, y), c = crps_pairs(x, y);
        EXPECT_NEAR(a, b, 1e-12);
        EXPECT_NEAR(a, c, 1e-12);
        EXPECT_GE(a, 0.0);
    }
}

TEST(Quantile, LinearInterpolation) {
    EXPECT_EQ(quantile({3.0, 1.0, 2.0}, 0.5), 2.0);
    EXPECT_EQ(quantile({1.0, 2.0}, 0.25), 1.25);
    EXPECT_EQ(quantile({5.0}, 0.9), 5.0);
}

TEST(Summarize, BandsAreNested) {
    std::vector<Eigen::MatrixXd> frames(1, Eigen::MatrixXd(500, 7));
    Rng rng = make_rng(14);
    std::normal_distribution<double> d;
    for (Eigen::Index i = 0; i < frames[0].size(); ++i) frames[0].data()[i] = d(rng) * (1 + i % 7);
    const Band b = summarize(frames);
    for (Eigen::Index j = 0; j < 7; ++j) {
        EXPECT_LE(b.lo95(0, j), b.lo68(0, j));
        EXPECT_LE(b.lo68(0, j), b.hi68(0, j));
        EXPECT_LE(b.hi68(0, j), b.hi95(0, j));
        EXPECT_GE(b.sd(0, j), 0.0);
        EXPECT_NEAR(b.mean(0, j), frames[0].col(j).mean(), 1e-12);
    }
}

TEST(Convergence, ReportFromTraces) {
    std::vector<Trace> traces;
    for (std::uint64_t c = 0; c < 3; ++c) {
        const auto a = support::normal_samples(400, 20 + c), b = support::normal_samples(400, 30 + c);
        std::vector<Eigen::VectorXd> draws;
        for (std::size_t i = 0; i < a.size(); ++i) {
            Eigen::VectorXd v(2);
            v << a[i], b[i];
            draws.push_back(v);
        }
        traces.push_back(make_trace(draws));
    }
    const ConvergenceReport r = convergence_report(traces);
    EXPECT_EQ(r.total_draws, 1200u);
    ASSERT_EQ(r.rhat.size(), 2u);
    EXPECT_LT(r.max_rhat, 1.02);
    EXPECT_GT(r.min_ess, 800.0);
    EXPECT_EQ(r.acceptance.size(), 3u);
    const nlohmann::json j = r;
    EXPECT_TRUE(j.contains("max_rhat"));
}

TEST(Convergence, ShortTracesLeaveStatisticsUndefined) {
    std::vector<Trace> traces;
    for (std::uint64_t c = 0; c < 2; ++c) {
        std::vector<Eigen::VectorXd> draws;
        for (double v : support::normal_samples(6, 40 + c)) draws.push_back(Eigen::VectorXd::Constant(1, v));
        traces.push_back(make_trace(draws));
    }
    const ConvergenceReport r = convergence_report(traces);
    ASSERT_EQ(r.ess.size(), 1u);
    EXPECT_TRUE(r.rhat.front().defined);
    EXPECT_FALSE(r.ess.front().defined);
    EXPECT_TRUE(nlohmann::json(r).at("ess").front().is_null());
}

TEST(ThinDraws, SpreadsOverPooledTraces) {
    std::vector<Eigen::VectorXd> d1, d2;
    for (int i = 0; i < 10; ++i) {
        d1.push_back(Eigen::VectorXd::Constant(1, i));
        d2.push_back(Eigen::VectorXd::Constant(1, 100 + i));
    }
    const auto t = thin_draws({make_trace(d1), make_trace(d2)}, 4);
    ASSERT_EQ(t.size(), 4u);
    EXPECT_TRUE(std::any_of(t.begin(), t.end(), [](const auto& v) { return v(0) >= 100; }));
    EXPECT_TRUE(std::any_of(t.begin(), t.end(), [](const auto& v) { return v(0) < 100; }));
}

class PushForwardTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        const PhysicsTargets tg = support::periodic_targets();
        problem_ = new CalibrationProblem(support::small_dataset(10.0, 0.5), 6, 1.2, tg);
        basis_ = new KLEBasis(build_basis(5.0, 10.0));
        c0_ = minimum_norm_free(tg, 6, 1.2, 0.05);
    }
    static void TearDownTestSuite() {
        delete problem_;
        delete basis_;
    }
    static std::vector<Eigen::VectorXd> draws(int n, double spread) {
        std::vector<Eigen::VectorXd> out;
        Rng rng = make_rng(40);
        std::normal_distribution<double> d;
        for (int k = 0; k < n; ++k) {
            Eigen::VectorXd th(c0_.size() + 1);
            for (Eigen::Index i = 0; i < c0_.size(); ++i) th(i) = c0_(i) * (1.0 + spread * d(rng));
            th(c0_.size()) = std::log(0.05) + spread * d(rng);
            out.push_back(th);
        }
        return out;
    }
    static PushForwardOptions options() {
        PushForwardOptions o;
        o.param_samples = 4;
        o.gp_per_param = 5;
        o.seed = 3;
        o.frames = {10, 25};
        return o;
    }
    static inline CalibrationProblem* problem_ = nullptr;
    static inline KLEBasis* basis_ = nullptr;
    static inline Eigen::VectorXd c0_;
};

TEST_F(PushForwardTest, ZeroXiFullEqualsParamOnly) {
    auto o = options();
    o.zero_xi = true;
    const auto d = draws(4, 0.01);
    const auto full = push_forward(*problem_, *basis_, d, PushForwardMode::Full, o);
    const auto param = push_forward(*problem_, *basis_, d, PushForwardMode::ParamOnly, options());
    ASSERT_EQ(full.samples.size(), param.samples.size());
    for (std::size_t s = 0; s < full.samples.size(); ++s)
        for (std::size_t f = 0; f < full.samples[s].size(); ++f)
            EXPECT_EQ((full.samples[s][f] - param.samples[s][f]).cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(PushForwardTest, DegenerateTraceGivesZeroWidthParamBands) {
    const std::vector<Eigen::VectorXd> one(4, draws(1, 0.0).front());
    const auto pf = push_forward(*problem_, *basis_, one, PushForwardMode::ParamOnly, options());
    for (const Band& b : pf.bands) {
        EXPECT_EQ((b.hi95 - b.lo95).cwiseAbs().maxCoeff(), 0.0);
        // Identical samples; the two-pass variance leaves only roundoff.
        EXPECT_LE(b.sd.cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST_F(PushForwardTest, ShapesNestingAndGpSpread) {
    const auto d = draws(4, 0.01);
    const auto full = push_forward(*problem_, *basis_, d, PushForwardMode::Full, options());
    const auto gp = push_forward(*problem_, *basis_, d, PushForwardMode::GpOnly, options());
    EXPECT_EQ(full.realizations, 20);
    EXPECT_EQ(full.diverged, 0);
    ASSERT_EQ(full.bands.size(), problem_->scenario_count());
    for (const Band& b : full.bands) {
        EXPECT_EQ(b.mean.rows(), 2);
        EXPECT_TRUE((b.lo95.array() <= b.lo68.array()).all());
        EXPECT_TRUE((b.hi68.array() <= b.hi95.array()).all());
    }
    EXPECT_GT((gp.bands[0].hi95 - gp.bands[0].lo95).maxCoeff(), 0.0);
    for (std::size_t s = 0; s < problem_->scenario_count(); ++s) {
        const double c = average_crps(full, *problem_, s, 1);
        EXPECT_GE(c, 0.0);
        const double cov = band_coverage(full, *problem_, s, 1);
        EXPECT_GE(cov, 0.0);
        EXPECT_LE(cov, 1.0);
    }
}

TEST_F(PushForwardTest, BandCsvAndGroupVelocityBand) {
    const auto d = draws(4, 0.01);
    const auto pf = push_forward(*problem_, *basis_, d, PushForwardMode::Full, options());
    const auto dir = support::scratch_dir("band");
    write_band_csv((dir / "b.csv").string(), problem_->grid().x, pf.bands[0], 0);
    std::ifstream in(dir / "b.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "x,mean,lo68,hi68,lo95,hi95");
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) lines += !l.empty();
    EXPECT_EQ(lines, problem_->grid().x.size());
    const DispersionBand vb = group_velocity_band(*problem_, d, 2.0, 10);
    ASSERT_EQ(vb.k.size(), 10u);
    for (std::size_t j = 0; j < 10; ++j) {
        EXPECT_LE(vb.lo95[j], vb.median[j]);
        EXPECT_LE(vb.median[j], vb.hi95[j]);
    }
}

TEST(PushForwardMode, Names) {
    for (auto m : {PushForwardMode::Full, PushForwardMode::GpOnly, PushForwardMode::ParamOnly})
        EXPECT_EQ(push_forward_mode_from_string(to_string(m)), m);
    EXPECT_THROW(push_forward_mode_from_string("bogus"), InvalidArgument);
}
