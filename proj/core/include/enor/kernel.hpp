#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace enor {

/// Low-frequency wave properties imposed on the kernel.
struct PhysicsTargets {
    double density = 1.0;
    double c0 = 1.0;
    double R = 0.0;  ///< d^2 v_g / d omega^2 at omega = 0

    void validate() const;
};

/// B_{m,M}(z) for 0 <= z <= 1.
double bernstein(int m, int degree, double z);
/// All M+1 basis values at z (de Casteljau-stable recurrence).
Eigen::VectorXd bernstein_basis(int degree, double z);

/// Bernstein coefficients C_0..C_M of a radial kernel with horizon delta.
/// When built through eliminate_constraints the last two entries satisfy
/// the discrete moment constraints on the grid spacing dx.
struct KernelCoeffs {
    int degree = 0;  ///< M
    double horizon = 1.2;
    double dx = 0.05;
    Eigen::VectorXd C;  ///< size M + 1
    PhysicsTargets targets;

    Eigen::VectorXd free_part() const { return C.head(degree - 1); }
    /// Number of bonds per side, floor(delta / dx) with points at |z| = delta included.
    int stencil_radius() const;
};

/// K(r) = sum_m C_m / delta^3 B_{m,M}(r / delta) for r <= delta, else 0.
double kernel_eval(const KernelCoeffs& k, double r);

/// K(r dx) for r = 1..stencil_radius (index 0 unused and zero).
Eigen::VectorXd stencil_weights(const KernelCoeffs& k);

/// Linear map from C to the stencil weights: row r is B_{m,M}(r dx / delta) / delta^3.
Eigen::MatrixXd stencil_basis(int degree, double horizon, double dx);

/// A_p(C) = dx * sum_{0 < |z_j| <= delta} |z_j|^p K(|z_j|).
double discrete_moment(const KernelCoeffs& k, int p);

/// Affine elimination (C_{M-1}, C_M) = offset + jacobian * free.
struct ConstraintMap {
    Eigen::Vector2d offset;
    Eigen::MatrixXd jacobian;  ///< 2 x (M - 1)
    double condition = 0.0;    ///< 2-norm condition number of the 2x2 system
};

ConstraintMap constraint_map(int degree, double horizon, double dx, const PhysicsTargets& targets);

/// Builds the full coefficient vector from C_0..C_{M-2}. Throws NumericalError
/// when the 2x2 system is singular (condition number reported in the message).
KernelCoeffs eliminate_constraints(const Eigen::VectorXd& free, const PhysicsTargets& targets, int degree,
                                   double horizon, double dx);

/// Free coefficients whose elimination gives the minimum-norm full vector.
Eigen::VectorXd minimum_norm_free(const PhysicsTargets& targets, int degree, double horizon, double dx);

/// Relative residuals of the two moment constraints.
Eigen::Vector2d constraint_residuals(const KernelCoeffs& k);

/// dt^2 * 2 dx * sum_j K(|z_j|); the explicit scheme is stable for nonnegative kernels when <= 4.
double stability_number(const KernelCoeffs& k, double dt);

void to_json(nlohmann::json& j, const KernelCoeffs& k);
void from_json(const nlohmann::json& j, KernelCoeffs& k);

}  // namespace enor
