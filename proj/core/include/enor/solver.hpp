#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "enor/field.hpp"
#include "enor/kernel.hpp"
#include "enor/loading.hpp"

namespace enor {

/// Uniform grid x_i = -L/2 + i dx with a collar of `collar` points at each end
/// (points closer than delta to the boundary). Interior = [collar, N - collar).
struct SolverGrid {
    std::vector<double> x;
    double dx = 0.05;
    double dt = 0.02;
    double horizon = 1.2;
    int radius = 0;  ///< bonds per side
    int collar = 0;

    static SolverGrid make(double length, double dx, double dt, double horizon);

    Eigen::Index points() const { return static_cast<Eigen::Index>(x.size()); }
    Eigen::Index interior_begin() const { return collar; }
    Eigen::Index interior_end() const { return points() - collar; }
    Eigen::Index interior_size() const { return interior_end() - interior_begin(); }
    double length() const { return x.back() - x.front(); }
    /// Bond midpoints (x_i + x_j) / 2 live on the half grid, index m = i + j.
    Eigen::Index half_points() const { return 2 * points() - 1; }
    double half_x(Eigen::Index m) const { return x.front() + 0.5 * dx * static_cast<double>(m); }
};

/// Discrete nonlocal operator dx * sum_j K(|x_j - x_i|) g((x_i + x_j) / 2) (u_j - u_i)
/// on the interior, with g the tabulated multiplicative correction (1 when absent).
class NonlocalOperator {
public:
    NonlocalOperator(const SolverGrid& grid, const Eigen::VectorXd& stencil_weights);
    NonlocalOperator(const SolverGrid& grid, const KernelCoeffs& kernel);

    /// Installs 1 + correction on the half grid (size 2N - 1); an empty vector restores the bare kernel.
    void set_correction(const Eigen::VectorXd& half_grid_correction);
    bool has_correction() const noexcept { return corrected_; }

    /// out[i] = (L u)_i for interior i; collar entries of out are left untouched.
    void apply(const double* u, double* out) const;

    /// Bond weight dx K(r dx) g(m) between i and i + r (midpoint index m = 2i + r).
    double bond(Eigen::Index i, int r) const;

    const SolverGrid& grid() const noexcept { return grid_; }
    const Eigen::VectorXd& weights() const noexcept { return w_; }

private:
    SolverGrid grid_;
    Eigen::VectorXd w_;  ///< dx * K(r dx), r = 0..radius
    bool corrected_ = false;
    /// Row r: dx K(r dx) g(2i + r) for i = 0..N-1 (bond to the right of i).
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> right_bonds_;
};

/// One explicit central-difference step on the interior:
/// next_i = 2 cur_i - prev_i + dt^2 (f_i + (L cur)_i). Collar entries are not written.
void step_accumulated(const NonlocalOperator& op, const double* cur, const double* prev, const double* force,
                      double* next);

/// Same update with DNS frames on the right-hand side (no error accumulation).
void step_stepwise(const NonlocalOperator& op, const Field& data, Eigen::Index n, const double* force, double* next);

enum class CollarKind { Zero, Pinned, Inflow };

/// Boundary values imposed on the collar at every step.
struct CollarPolicy {
    CollarKind kind = CollarKind::Zero;
    const Field* pinned = nullptr;              ///< data frames for Pinned
    std::function<double(double)> inlet;        ///< left-end displacement for Inflow
    double inflow_speed = 1.0;                  ///< collar point x sees inlet(t - (x - x_0) / speed)

    static CollarPolicy zero() { return {}; }
    static CollarPolicy pin(const Field& data) { return {CollarKind::Pinned, &data, {}, 1.0}; }
    static CollarPolicy inflow(std::function<double(double)> inlet, double speed) {
        return {CollarKind::Inflow, nullptr, std::move(inlet), speed};
    }
};

/// Body force f(x_i, t^n) sampled on the grid, one row per frame; empty for velocity-driven scenarios.
Field sample_forcing(const SolverGrid& grid, const LoadingScenario& scenario, Eigen::Index frames);

/// Full rollout from rest (u^0 = u^1 = 0 in the interior). Returns frames x N including collar values.
/// Throws SolverDivergence on a non-finite interior value.
Field solve_trajectory(const NonlocalOperator& op, Eigen::Index frames, const Field& forcing,
                       const CollarPolicy& collar);

/// Step-wise prediction: frame n+1 from data frames n, n-1. Frames 0 and 1 are zero; collar copied from data.
Field stepwise_prediction(const NonlocalOperator& op, const Field& data, const Field& forcing);

/// sqrt(dt dx sum_n sum_{i in interior} u^2).
double interior_l2(const SolverGrid& grid, const Field& u);

}  // namespace enor
