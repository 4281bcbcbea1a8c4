#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "enor/ensemble.hpp"
#include "enor/kernel.hpp"

namespace enor {

struct FitConfig {
    double lambda = 1e-6;
    int max_iterations = 400;
    double gradient_tolerance = 1e-12;
    double function_tolerance = 1e-14;
    /// Adjoint gradient when true, central finite differences with `fd_step` otherwise.
    bool adjoint = true;
    double fd_step = 1e-6;

    void validate() const;
};

/// sum_s ||u_NL - u||^2 / ||u||^2 over interior points and all frames, plus lambda ||C||^2.
/// Returns +infinity when a rollout diverges. `gradient`, if given, receives d/d free.
double nor_objective(const CalibrationProblem& problem, const Eigen::VectorXd& free, double lambda,
                     Eigen::VectorXd* gradient = nullptr);

/// Central finite-difference gradient of nor_objective.
Eigen::VectorXd nor_gradient_fd(const CalibrationProblem& problem, const Eigen::VectorXd& free, double lambda,
                                double step);

struct FitResult {
    Eigen::VectorXd free;
    KernelCoeffs kernel;
    double loss = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string message;
    std::vector<double> loss_history;  ///< loss at every accepted iterate
};

/// Quasi-Newton (L-BFGS) minimization of nor_objective from `start`
/// (minimum-norm free coefficients when empty). Non-convergence returns the best iterate.
FitResult fit_nor(const CalibrationProblem& problem, const FitConfig& config, const Eigen::VectorXd& start = {});

void to_json(nlohmann::json& j, const FitResult& r);

struct SigmaInit {
    double ln_sigma = 0.0;
    double objective = 0.0;
    bool flat = false;  ///< objective insensitive to sigma; midpoint returned
    std::vector<std::pair<double, double>> evaluations;  ///< (ln sigma, objective)
};

/// Golden-section search over ln sigma_gp in [lo, hi] (`points` objective evaluations) of
/// the ABC misfit of the fine K-member ensemble at fixed kernel coefficients.
SigmaInit init_sigma_gp(const CalibrationProblem& problem, const Eigen::VectorXd& free, double gamma,
                        const Eigen::MatrixXd& half_modes, const Eigen::MatrixXd& xi_block, double lo, double hi,
                        int points = 16);

}  // namespace enor
