#pragma once

#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace enor {

struct SolverGrid;

/// First `count` positive roots of (w^2 - 1/l^2) tan(w L) - 2 w / l = 0.
/// Root i (1-based) lies in ((i-1) pi / L, i pi / L), where it solves
/// w L - 2 atan(1 / (l w)) = (i - 1) pi; found by bisection plus Newton polish.
std::vector<double> solve_roots(double lgp, double length, int count);

/// |(w^2 - 1/l^2) tan(w L) - 2 w / l| / max(w^2, 1/l^2).
double root_residual(double lgp, double length, double w);

/// Truncated Karhunen-Loeve basis of the unit-variance exponential covariance
/// exp(-|x - y| / l) on [0, L].
struct KLEBasis {
    double lgp = 1.0;
    double length = 1.0;
    std::vector<double> w, lambda, tau;

    int terms() const noexcept { return static_cast<int>(w.size()); }
    /// phi_i(s) = tau_i (cos(w_i s) + sin(w_i s) / (l w_i)), s in [0, L]; i is 0-based.
    double phi(int i, double s) const;
    /// Retained fraction of the total variance sum_all lambda = L.
    double energy_fraction() const;
    /// Matrix of sqrt(lambda_i) phi_i(s_j) (rows: points, cols: modes).
    Eigen::MatrixXd modes(const std::vector<double>& s) const;
};

/// lambda_i = 2 l / (1 + l^2 w_i^2), tau_i = brace^{-1/2}; keeps the smallest R
/// with sum_{i<=R} lambda_i >= energy * L. Throws NumericalError if R > max_terms.
KLEBasis build_basis(double lgp, double length, double energy = 0.9, int max_terms = 4096);

/// Modes evaluated at the bond midpoints of the solver grid, bar coordinate x mapped to s = x + L/2.
Eigen::MatrixXd half_grid_modes(const KLEBasis& basis, const SolverGrid& grid);

/// 1 + sigma * modes * xi.
Eigen::VectorXd sample_field(const Eigen::MatrixXd& modes, double sigma, const Eigen::VectorXd& xi);

void to_json(nlohmann::json& j, const KLEBasis& b);
void from_json(const nlohmann::json& j, KLEBasis& b);

}  // namespace enor
