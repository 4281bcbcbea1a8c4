#include "enor/solver.hpp"

#include <cmath>

#include <fmt/format.h>

#include "enor/error.hpp"

namespace enor {

SolverGrid SolverGrid::make(double length, double dx, double dt, double horizon) {
    if (!(length > 0.0) || !(dx > 0.0) || !(dt > 0.0) || !(horizon > 0.0))
        throw InvalidArgument("solver grid parameters must be positive");
    SolverGrid g;
    g.dx = dx;
    g.dt = dt;
    g.horizon = horizon;
    g.radius = static_cast<int>(std::floor(horizon / dx + 1e-9));
    if (g.radius < 1) throw InvalidArgument("horizon must cover at least one grid spacing");
    g.collar = static_cast<int>(std::ceil(horizon / dx - 1e-9));
    const double cells = std::round(length / dx);
    if (std::abs(cells * dx - length) > 1e-9 * length)
        throw InvalidArgument(fmt::format("bar length {} is not a multiple of dx = {}", length, dx));
    const auto n = static_cast<std::size_t>(cells) + 1;
    if (n <= static_cast<std::size_t>(2 * g.collar)) throw InvalidArgument("bar is too short for the horizon");
    g.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.x[i] = -0.5 * length + static_cast<double>(i) * dx;
    return g;
}

NonlocalOperator::NonlocalOperator(const SolverGrid& grid, const Eigen::VectorXd& stencil_weights)
    : grid_(grid), w_(stencil_weights * grid.dx) {
    if (w_.size() != grid.radius + 1)
        throw InvalidArgument(fmt::format("stencil has {} weights, grid radius needs {}", w_.size(), grid.radius + 1));
    w_(0) = 0.0;
}

NonlocalOperator::NonlocalOperator(const SolverGrid& grid, const KernelCoeffs& kernel)
    : NonlocalOperator(grid, [&] {
          if (std::abs(kernel.dx - grid.dx) > 1e-12 || std::abs(kernel.horizon - grid.horizon) > 1e-12)
              throw InvalidArgument("kernel and solver grid disagree on dx or delta");
          return stencil_weights(kernel);
      }()) {}

void NonlocalOperator::set_correction(const Eigen::VectorXd& g) {
    if (g.size() == 0) {
        corrected_ = false;
        right_bonds_.resize(0, 0);
        return;
    }
    const Eigen::Index n = grid_.points();
    if (g.size() != grid_.half_points())
        throw InvalidArgument(fmt::format("correction has {} entries, expected {}", g.size(), grid_.half_points()));
    right_bonds_.setZero(grid_.radius + 1, n);
    for (int r = 1; r <= grid_.radius; ++r)
        for (Eigen::Index i = 0; i + r < n; ++i) right_bonds_(r, i) = w_(r) * g(2 * i + r);
    corrected_ = true;
}

double NonlocalOperator::bond(Eigen::Index i, int r) const { return corrected_ ? right_bonds_(r, i) : w_(r); }

void NonlocalOperator::apply(const double* u, double* out) const {
    const Eigen::Index b = grid_.interior_begin();
    const Eigen::Index e = grid_.interior_end();
    for (Eigen::Index i = b; i < e; ++i) out[i] = 0.0;
    for (int r = 1; r <= grid_.radius; ++r) {
        if (corrected_) {
            const double* rb = right_bonds_.row(r).data();
            for (Eigen::Index i = b; i < e; ++i)
                out[i] += rb[i] * (u[i + r] - u[i]) + rb[i - r] * (u[i - r] - u[i]);
        } else {
            const double w = w_(r);
            for (Eigen::Index i = b; i < e; ++i) out[i] += w * (u[i + r] - u[i]) + w * (u[i - r] - u[i]);
        }
    }
}

void step_accumulated(const NonlocalOperator& op, const double* cur, const double* prev, const double* force,
                      double* next) {
    const SolverGrid& g = op.grid();
    const double dt2 = g.dt * g.dt;
    op.apply(cur, next);
    for (Eigen::Index i = g.interior_begin(); i < g.interior_end(); ++i) {
        const double f = force ? force[i] : 0.0;
        next[i] = 2.0 * cur[i] - prev[i] + dt2 * f + dt2 * next[i];
    }
}

void step_stepwise(const NonlocalOperator& op, const Field& data, Eigen::Index n, const double* force, double* next) {
    if (n < 1 || n + 1 > data.rows()) throw InvalidArgument(fmt::format("step-wise update needs frames {} and {}", n - 1, n));
    step_accumulated(op, data.row(n).data(), data.row(n - 1).data(), force, next);
}

Field sample_forcing(const SolverGrid& grid, const LoadingScenario& scenario, Eigen::Index frames) {
    if (!scenario.force_driven()) return {};
    Field f(frames, grid.points());
    for (Eigen::Index n = 0; n < frames; ++n)
        for (Eigen::Index i = 0; i < grid.points(); ++i)
            f(n, i) = forcing_eval(scenario, grid.x[static_cast<std::size_t>(i)], static_cast<double>(n) * grid.dt);
    return f;
}

namespace {

void fill_collar(const SolverGrid& g, const CollarPolicy& policy, Eigen::Index n, double* u) {
    const Eigen::Index np = g.points();
    const Eigen::Index c = g.collar;
    switch (policy.kind) {
        case CollarKind::Zero:
            for (Eigen::Index i = 0; i < c; ++i) u[i] = u[np - 1 - i] = 0.0;
            break;
        case CollarKind::Pinned: {
            const Field& d = *policy.pinned;
            for (Eigen::Index i = 0; i < c; ++i) {
                u[i] = d(n, i);
                u[np - 1 - i] = d(n, np - 1 - i);
            }
            break;
        }
        case CollarKind::Inflow: {
            const double t = static_cast<double>(n) * g.dt;
            for (Eigen::Index i = 0; i < c; ++i) {
                const double delay = (g.x[static_cast<std::size_t>(i)] - g.x.front()) / policy.inflow_speed;
                u[i] = t > delay ? policy.inlet(t - delay) : 0.0;
                u[np - 1 - i] = 0.0;
            }
            break;
        }
    }
}

void check_interior(const SolverGrid& g, const double* u, Eigen::Index n) {
    double s = 0.0;
    for (Eigen::Index i = g.interior_begin(); i < g.interior_end(); ++i) s += u[i];
    if (std::isfinite(s)) return;
    for (Eigen::Index i = g.interior_begin(); i < g.interior_end(); ++i)
        if (!std::isfinite(u[i])) throw SolverDivergence(static_cast<int>(i), static_cast<int>(n));
    throw SolverDivergence(-1, static_cast<int>(n));
}

}  // namespace

Field solve_trajectory(const NonlocalOperator& op, Eigen::Index frames, const Field& forcing,
                       const CollarPolicy& collar) {
    const SolverGrid& g = op.grid();
    if (frames < 2) throw InvalidArgument("a rollout needs at least two frames");
    if (forcing.size() != 0 && (forcing.rows() < frames || forcing.cols() != g.points()))
        throw InvalidArgument("forcing table does not match the solver grid");
    if (collar.kind == CollarKind::Pinned &&
        (!collar.pinned || collar.pinned->rows() < frames || collar.pinned->cols() != g.points()))
        throw InvalidArgument("pinned collar data do not cover the rollout");
    if (collar.kind == CollarKind::Inflow && !collar.inlet) throw InvalidArgument("inflow collar needs an inlet signal");

    Field u = Field::Zero(frames, g.points());
    fill_collar(g, collar, 0, u.row(0).data());
    fill_collar(g, collar, 1, u.row(1).data());
    for (Eigen::Index n = 1; n + 1 < frames; ++n) {
        const double* f = forcing.size() ? forcing.row(n).data() : nullptr;
        double* next = u.row(n + 1).data();
        step_accumulated(op, u.row(n).data(), u.row(n - 1).data(), f, next);
        fill_collar(g, collar, n + 1, next);
        check_interior(g, next, n + 1);
    }
    return u;
}

Field stepwise_prediction(const NonlocalOperator& op, const Field& data, const Field& forcing) {
    const SolverGrid& g = op.grid();
    if (data.cols() != g.points()) throw InvalidArgument("data do not match the solver grid");
    const Eigen::Index frames = data.rows();
    Field u = Field::Zero(frames, g.points());
    for (Eigen::Index n = 1; n + 1 < frames; ++n) {
        const double* f = forcing.size() ? forcing.row(n).data() : nullptr;
        double* next = u.row(n + 1).data();
        step_stepwise(op, data, n, f, next);
        for (Eigen::Index i = 0; i < g.collar; ++i) {
            next[i] = data(n + 1, i);
            next[g.points() - 1 - i] = data(n + 1, g.points() - 1 - i);
        }
        check_interior(g, next, n + 1);
    }
    return u;
}

double interior_l2(const SolverGrid& g, const Field& u) {
    const auto block = u.middleCols(g.interior_begin(), g.interior_size());
    return std::sqrt(g.dt * g.dx * block.squaredNorm());
}

}  // namespace enor
