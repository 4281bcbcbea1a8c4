#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "enor/kle.hpp"
#include "enor/rng.hpp"
#include "enor/solver.hpp"

using namespace enor;

namespace {

// Pole-free form of the transcendental equation: (w^2 - 1/l^2) sin(wL) - (2w/l) cos(wL).
double smooth_residual(double l, double L, double w) {
    return (w * w - 1.0 / (l * l)) * std::sin(w * L) - 2.0 * w / l * std::cos(w * L);
}

// Oracle: sign changes of the pole-free residual on a uniform scan, refined by bisection.
std::vector<double> scan_roots(double l, double L, double w_max, int points) {
    std::vector<double> roots;
    double a = w_max / points, fa = smooth_residual(l, L, a);
    for (int j = 2; j <= points; ++j) {
        const double b = w_max * j / points, fb = smooth_residual(l, L, b);
        if ((fa < 0.0) != (fb < 0.0)) {
            double lo = a, hi = b, flo = fa;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi), fm = smooth_residual(l, L, mid);
                if ((fm < 0.0) == (flo < 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    return roots;
}

double trapezoid(const std::function<double(double)>& f, double L, int n) {
    const double h = L / n;
    double s = 0.5 * (f(0.0) + f(L));
    for (int j = 1; j < n; ++j) s += f(j * h);
    return s * h;
}

}  // namespace

TEST(KleRoots, ResidualsAndBrackets) {
    for (double l : {40.0, 10.0, 0.625, 0.15625}) {
        const auto w = solve_roots(l, 20.0, 60);
        ASSERT_EQ(w.size(), 60u);
        for (std::size_t i = 0; i < w.size(); ++i) {
            EXPECT_LE(root_residual(l, 20.0, w[i]), 1e-10) << "l=" << l << " i=" << i;
            EXPECT_GT(w[i], i * std::numbers::pi / 20.0);
            EXPECT_LT(w[i], (i + 1) * std::numbers::pi / 20.0);
            if (i > 0) EXPECT_GT(w[i], w[i - 1]);
        }
    }
}

TEST(KleRoots, AgreeWithScanOracle) {
    for (double l : {10.0, 0.625}) {
        const auto w = solve_roots(l, 20.0, 30);
        const auto oracle = scan_roots(l, 20.0, w.back() + 0.5 * std::numbers::pi / 20.0, 10000);
        ASSERT_GE(oracle.size(), w.size());
        for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w[i], oracle[i], 1e-9 * oracle[i]);
    }
}

TEST(KleBasis, EigenvaluesDecreaseAndCaptureNinetyPercent) {
    for (double l : {40.0, 10.0, 0.625}) {
        const KLEBasis b = build_basis(l, 20.0);
        for (int i = 1; i < b.terms(); ++i) EXPECT_LT(b.lambda[i], b.lambda[i - 1]);
        EXPECT_GE(b.energy_fraction(), 0.9);
        double without_last = b.energy_fraction() - b.lambda.back() / 20.0;
        EXPECT_LT(without_last, 0.9);
    }
}

TEST(KleBasis, TruncationGrowsAsCorrelationShrinks) {
    int prev = 0;
    for (double l = 40.0; l >= 0.15625 - 1e-12; l /= 2.0) {
        const KLEBasis b = build_basis(l, 20.0);
        EXPECT_GE(b.terms(), prev) << "l=" << l;
        prev = b.terms();
    }
    EXPECT_GT(prev, build_basis(40.0, 20.0).terms());
}

TEST(KleBasis, OrthonormalByQuadrature) {
    for (double l : {10.0, 0.625}) {
        const KLEBasis b = build_basis(l, 20.0);
        const int n = std::min(b.terms(), 8);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                const double v = trapezoid([&](double s) { return b.phi(i, s) * b.phi(j, s); }, 20.0, 200000);
                EXPECT_NEAR(v, i == j ? 1.0 : 0.0, i == j ? 1e-8 : 1e-6) << i << "," << j;
            }
    }
}

TEST(KleBasis, MatchesNystromEigenvalues) {
    const double l = 10.0, L = 20.0;
    const int n = 512;
    const double h = L / (n - 1);
    Eigen::VectorXd wq = Eigen::VectorXd::Constant(n, h);
    wq(0) = wq(n - 1) = 0.5 * h;
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = std::sqrt(wq(i) * wq(j)) * std::exp(-std::abs(i - j) * h / l);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    const KLEBasis b = build_basis(l, L, 0.999);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(b.lambda[i], es.eigenvalues()(n - 1 - i), 1e-3 * b.lambda[i]) << i;
}

TEST(KleBasis, MercerTruncationErrorBoundedByTailEnergy) {
    const double l = 2.0, L = 20.0;
    const KLEBasis b = build_basis(l, L);
    const int n = 300;
    double err = 0.0, ref = 0.0;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            const double x = L * i / n, y = L * j / n;
            double c = 0.0;
            for (int r = 0; r < b.terms(); ++r) c += b.lambda[r] * b.phi(r, x) * b.phi(r, y);
            const double e = std::exp(-std::abs(x - y) / l);
            err += (e - c) * (e - c);
            ref += e * e;
        }
    EXPECT_LE(std::sqrt(err / ref), 1.0 - b.energy_fraction() + 1e-3);
}

TEST(KleSample, ZeroXiGivesUnitCorrection) {
    const SolverGrid g = SolverGrid::make(20.0, 0.05, 0.02, 1.2);
    const KLEBasis b = build_basis(10.0, 20.0);
    const Eigen::MatrixXd m = half_grid_modes(b, g);
    EXPECT_EQ(m.rows(), g.half_points());
    const Eigen::VectorXd c = sample_field(m, 0.7, Eigen::VectorXd::Zero(b.terms()));
    EXPECT_EQ((c.array() - 1.0).abs().maxCoeff(), 0.0);
}

TEST(KleSample, MatchesDirectSummation) {
    const SolverGrid g = SolverGrid::make(10.0, 0.05, 0.02, 1.2);
    const KLEBasis b = build_basis(1.0, 10.0);
    const Eigen::MatrixXd m = half_grid_modes(b, g);
    Rng rng = make_rng(3);
    std::normal_distribution<double> d;
    Eigen::VectorXd xi(b.terms());
    for (auto& v : xi) v = d(rng);
    const Eigen::VectorXd c = sample_field(m, 0.4, xi);
    for (Eigen::Index k = 0; k < g.half_points(); k += 17) {
        const double s = g.half_x(k) + 5.0;
        double direct = 0.0;
        for (int i = 0; i < b.terms(); ++i) direct += std::sqrt(b.lambda[i]) * b.phi(i, s) * xi(i);
        EXPECT_NEAR(c(k), 1.0 + 0.4 * direct, 1e-12);
    }
}

TEST(KleSample, MonteCarloMeanAndCovariance) {
    const double L = 20.0, l = 10.0, sigma = 0.5;
    const KLEBasis b = build_basis(l, L);
    std::vector<double> s{0.0, 2.5, 5.0, 10.0, 15.0, 20.0};
    const Eigen::MatrixXd m = b.modes(s);
    const int N = 20000;
    Rng rng = make_rng(21);
    std::normal_distribution<double> d;
    Eigen::MatrixXd samples(N, s.size());
    Eigen::VectorXd xi(b.terms());
    for (int k = 0; k < N; ++k) {
        for (auto& v : xi) v = d(rng);
        samples.row(k) = (sigma * m * xi).transpose();
    }
    const Eigen::RowVectorXd mean = samples.colwise().mean();
    const Eigen::MatrixXd centered = samples.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / (N - 1);
    const Eigen::MatrixXd truncated = sigma * sigma * m * m.transpose();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double sd = std::sqrt(cov(i, i));
        EXPECT_NEAR(mean(i), 0.0, 4.0 * sd / std::sqrt(N));
        for (std::size_t j = 0; j < s.size(); ++j) {
            const double se = std::sqrt((truncated(i, i) * truncated(j, j) + truncated(i, j) * truncated(i, j)) / N);
            EXPECT_NEAR(cov(i, j), truncated(i, j), 5.0 * se);
        }
    }
}

TEST(KleBasis, JsonRoundTrip) {
    const KLEBasis b = build_basis(0.625, 20.0);
    const nlohmann::json j = b;
    const auto back = j.get<KLEBasis>();
    EXPECT_EQ(back.terms(), b.terms());
    EXPECT_EQ(back.w, b.w);
    EXPECT_EQ(back.tau, b.tau);
}
