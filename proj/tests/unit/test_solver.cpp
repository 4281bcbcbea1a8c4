#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "enor/error.hpp"
#include "enor/kle.hpp"
#include "enor/rng.hpp"
#include "enor/solver.hpp"

#include "fixtures.hpp"

using namespace enor;

namespace {

struct Rig {
    SolverGrid grid = SolverGrid::make(10.0, 0.05, 0.02, 1.2);
    PhysicsTargets targets = support::periodic_targets();
    KernelCoeffs kernel = eliminate_constraints(minimum_norm_free(targets, 24, 1.2, 0.05), targets, 24, 1.2, 0.05);
};

Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::normal_distribution<double> d;
    Eigen::VectorXd v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

}  // namespace

TEST(SolverGrid, GeometryAndCollar) {
    const SolverGrid g = SolverGrid::make(20.0, 0.05, 0.02, 1.2);
    EXPECT_EQ(g.points(), 401);
    EXPECT_EQ(g.radius, 24);
    EXPECT_EQ(g.collar, 24);
    EXPECT_EQ(g.interior_size(), 353);
    EXPECT_DOUBLE_EQ(g.half_x(2 * 10 + 3), 0.5 * (g.x[10] + g.x[13]));
    EXPECT_THROW(SolverGrid::make(20.0, 0.05, 0.02, 0.01), InvalidArgument);
    EXPECT_THROW(SolverGrid::make(20.01, 0.05, 0.02, 1.2), InvalidArgument);
}

TEST(Step, RestStateStaysAtRest) {
    Rig s;
    NonlocalOperator op(s.grid, s.kernel);
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(s.grid.points());
    Eigen::VectorXd next = Eigen::VectorXd::Constant(s.grid.points(), 7.0);
    step_accumulated(op, z.data(), z.data(), nullptr, next.data());
    EXPECT_EQ(next.segment(s.grid.interior_begin(), s.grid.interior_size()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Step, ConstantsAreAnnihilated) {
    Rig s;
    NonlocalOperator op(s.grid, s.kernel);
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(s.grid.points(), 3.25);
    Eigen::VectorXd next = c;
    step_accumulated(op, c.data(), c.data(), nullptr, next.data());
    EXPECT_LE((next - c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Step, ZeroXiEqualsBareKernel) {
    Rig s;
    NonlocalOperator bare(s.grid, s.kernel);
    NonlocalOperator gp(s.grid, s.kernel);
    const KLEBasis basis = build_basis(5.0, s.grid.length());
    const Eigen::MatrixXd modes = half_grid_modes(basis, s.grid);
    gp.set_correction(sample_field(modes, 0.3, Eigen::VectorXd::Zero(basis.terms())));
    const Eigen::VectorXd u = random_vector(s.grid.points(), 1), v = random_vector(s.grid.points(), 2);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(s.grid.points()), b = a;
    step_accumulated(bare, u.data(), v.data(), nullptr, a.data());
    step_accumulated(gp, u.data(), v.data(), nullptr, b.data());
    for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_NEAR(a(i), b(i), 2.0 * std::numeric_limits<double>::epsilon() * std::abs(a(i)));
}

TEST(Step, CorrectedBondsConserveMomentum) {
    Rig s;
    NonlocalOperator op(s.grid, s.kernel);
    const KLEBasis basis = build_basis(2.0, s.grid.length());
    op.set_correction(sample_field(half_grid_modes(basis, s.grid), 0.5, random_vector(basis.terms(), 4)));
    // Displacement supported away from the collar: all bonds touching it are interior pairs.
    Eigen::VectorXd u = Eigen::VectorXd::Zero(s.grid.points());
    const Eigen::Index lo = 2 * s.grid.collar, hi = s.grid.points() - 2 * s.grid.collar;
    u.segment(lo, hi - lo) = random_vector(hi - lo, 5);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(s.grid.points());
    op.apply(u.data(), f.data());
    EXPECT_LE(std::abs(f.sum()), 1e-11 * f.cwiseAbs().sum());
}

TEST(Solver, FrameCountAndDeterminism) {
    Rig s;
    NonlocalOperator op(s.grid, s.kernel);
    const auto sc = LoadingScenario::oscillating_source(3, 0.2, 10.0);
    const Field f = sample_forcing(s.grid, sc, 101);
    const Field a = solve_trajectory(op, 101, f, CollarPolicy::zero());
    const Field b = solve_trajectory(op, 101, f, CollarPolicy::zero());
    EXPECT_EQ(a.rows(), 101);
    EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(a.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Solver, LinearInForcing) {
    Rig s;
    NonlocalOperator op(s.grid, s.kernel);
    const Field f1 = sample_forcing(s.grid, LoadingScenario::oscillating_source(2, 0.2, 10.0), 101);
    const Field f2 = sample_forcing(s.grid, LoadingScenario::oscillating_source(7, 0.2, 10.0), 101);
    const Field u1 = solve_trajectory(op, 101, f1, CollarPolicy::zero());
    const Field u2 = solve_trajectory(op, 101, f2, CollarPolicy::zero());
    const Field f12 = f1 + f2;
    const Field u12 = solve_trajectory(op, 101, f12, CollarPolicy::zero());
    EXPECT_LE((u12 - u1 - u2).norm(), 1e-10 * u12.norm());
}

TEST(Solver, StepwisePredictionReproducesModelGeneratedData) {
    Rig s;
    NonlocalOperator op(s.grid, s.kernel);
    const KLEBasis basis = build_basis(4.0, s.grid.length());
    op.set_correction(sample_field(half_grid_modes(basis, s.grid), 0.2, random_vector(basis.terms(), 8)));
    const Field f = sample_forcing(s.grid, LoadingScenario::oscillating_source(4, 0.2, 10.0), 101);
    const Field data = solve_trajectory(op, 101, f, CollarPolicy::zero());
    const Field pred = stepwise_prediction(op, data, f);
    const Eigen::Index b = s.grid.interior_begin(), w = s.grid.interior_size();
    EXPECT_LE((pred.block(2, b, 99, w) - data.block(2, b, 99, w)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Solver, StepwiseOnZeroDataIsZero) {
    Rig s;
    NonlocalOperator op(s.grid, s.kernel);
    const Field z = Field::Zero(20, s.grid.points());
    EXPECT_EQ(stepwise_prediction(op, z, Field()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Solver, PlaneWaveAdvancesAtDispersionFrequency) {
    Rig s;
    NonlocalOperator op(s.grid, s.kernel);
    const double k = 1.3;
    const double omega = dispersion(s.kernel, k).omega;
    const double dt = s.grid.dt;
    // Exact discrete frequency of the leapfrog scheme: 2 - 2 cos(W dt) = dt^2 omega^2.
    const double W = std::acos(1.0 - 0.5 * dt * dt * omega * omega) / dt;
    EXPECT_LE(std::abs(W - omega), dt * dt * std::pow(omega, 3));
    const Eigen::Index frames = 200;
    Field exact(frames, s.grid.points());
    for (Eigen::Index n = 0; n < frames; ++n)
        for (Eigen::Index i = 0; i < s.grid.points(); ++i) exact(n, i) = std::cos(k * s.grid.x[i] - W * dt * n);
    Field u = exact;
    for (Eigen::Index n = 1; n + 1 < frames; ++n) step_accumulated(op, u.row(n).data(), u.row(n - 1).data(), nullptr, u.row(n + 1).data());
    EXPECT_LE((u - exact).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Solver, StableRolloutKeepsBoundedEnergy) {
    Rig s;
    Eigen::VectorXd c = Eigen::VectorXd::Ones(7);
    KernelCoeffs k;
    k.degree = 6;
    k.horizon = 1.2;
    k.dx = 0.05;
    k.C = 3.0 * c;
    ASSERT_LE(stability_number(k, s.grid.dt), 4.0);
    NonlocalOperator op(s.grid, k);
    Field u = Field::Zero(1001, s.grid.points());
    const Eigen::Index b = s.grid.interior_begin(), w = s.grid.interior_size();
    u.row(0).segment(b, w) = random_vector(w, 3).transpose();
    u.row(1) = u.row(0);
    for (Eigen::Index n = 1; n < 1000; ++n) step_accumulated(op, u.row(n).data(), u.row(n - 1).data(), nullptr, u.row(n + 1).data());
    EXPECT_TRUE(u.allFinite());
    EXPECT_LE(u.row(1000).cwiseAbs().maxCoeff(), 50.0 * u.row(0).cwiseAbs().maxCoeff());
}

TEST(Solver, DivergenceNamesPointAndStep) {
    Rig s;
    KernelCoeffs k = s.kernel;
    k.C *= 1e6;
    NonlocalOperator op(s.grid, k);
    const Field f = sample_forcing(s.grid, LoadingScenario::oscillating_source(3, 0.2, 10.0), 2001);
    try {
        solve_trajectory(op, 2001, f, CollarPolicy::zero());
        FAIL() << "expected divergence";
    } catch (const SolverDivergence& e) {
        EXPECT_GE(e.point(), s.grid.interior_begin());
        EXPECT_LT(e.point(), s.grid.interior_end());
        EXPECT_GT(e.step(), 1);
    }
}

TEST(Solver, InteriorNorm) {
    Rig s;
    Field u = Field::Ones(11, s.grid.points());
    EXPECT_NEAR(interior_l2(s.grid, u), std::sqrt(s.grid.dt * s.grid.dx * 11.0 * s.grid.interior_size()), 1e-12);
}

TEST(Solver, PinnedCollarCopiesData) {
    Rig s;
    NonlocalOperator op(s.grid, s.kernel);
    Field data = Field::Zero(30, s.grid.points());
    for (Eigen::Index n = 0; n < 30; ++n) data.row(n).setConstant(0.01 * n);
    const Field u = solve_trajectory(op, 30, Field(), CollarPolicy::pin(data));
    for (Eigen::Index n = 0; n < 30; ++n) {
        EXPECT_EQ(u(n, 0), data(n, 0));
        EXPECT_EQ(u(n, s.grid.points() - 1), data(n, s.grid.points() - 1));
    }
}
