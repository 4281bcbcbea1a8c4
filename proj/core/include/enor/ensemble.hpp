#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "enor/dataset.hpp"
#include "enor/field.hpp"
#include "enor/kernel.hpp"
#include "enor/solver.hpp"

namespace enor {

/// Training data plus the solver setup shared by the deterministic fit and the posterior.
class CalibrationProblem {
public:
    CalibrationProblem(const WaveDataset& data, int degree, double horizon, const PhysicsTargets& targets);

    const SolverGrid& grid() const noexcept { return grid_; }
    const WaveDataset& dataset() const noexcept { return data_; }
    int degree() const noexcept { return degree_; }
    int free_count() const noexcept { return degree_ - 1; }
    const PhysicsTargets& targets() const noexcept { return targets_; }
    const ConstraintMap& constraints() const noexcept { return map_; }
    /// Rows r = 0..radius of B_{m,M}(r dx / delta) / delta^3.
    const Eigen::MatrixXd& basis() const noexcept { return basis_; }

    std::size_t scenario_count() const noexcept { return data_.scenario_count(); }
    Eigen::Index frames() const { return data_.frames(); }
    const Field& data(std::size_t s) const { return data_.u[s]; }
    const Field& forcing(std::size_t s) const { return forcing_[s]; }
    CollarPolicy collar(std::size_t s) const;

    /// Full coefficient vector from the free part.
    Eigen::VectorXd full_coefficients(const Eigen::VectorXd& free) const;
    KernelCoeffs kernel(const Eigen::VectorXd& free) const;
    /// K(r dx), r = 0..radius.
    Eigen::VectorXd stencil(const Eigen::VectorXd& free) const;

    Field rollout(const NonlocalOperator& op, std::size_t s) const;
    /// Sum over interior points and all frames of the squared data.
    double data_energy(std::size_t s) const { return energy_[s]; }

private:
    WaveDataset data_;
    SolverGrid grid_;
    int degree_;
    PhysicsTargets targets_;
    ConstraintMap map_;
    Eigen::MatrixXd basis_;
    std::vector<Field> forcing_;
    std::vector<double> energy_;
};

/// sum over frames n >= 1 and interior i of (mu - u)^2 + (sd - gamma |mu - u|)^2.
double abc_misfit(const SolverGrid& grid, const Field& mean, const Field& sd, const Field& data, double gamma);

/// Pointwise mean and standard deviation (K - 1 normalization) per scenario.
struct EnsembleMoments {
    std::vector<Field> mean;
    std::vector<Field> sd;
};

/// Fine (accumulated) ensemble: one rollout per realization xi_k (rows of xi_block) and scenario.
/// `visit`, when set, receives (k, s, trajectory) for every rollout.
EnsembleMoments fine_moments(const CalibrationProblem& problem, const Eigen::VectorXd& free, double sigma,
                             const Eigen::MatrixXd& half_modes, const Eigen::MatrixXd& xi_block,
                             const std::function<void(int, std::size_t, const Field&)>& visit = {});

/// Coarse (step-wise) ensemble moments in closed form. The step-wise update is
/// affine in xi, so the K-sample mean and variance follow from the sample mean
/// and covariance of the xi block; results coincide with explicit step-wise
/// rollouts of every realization.
class CoarseModel {
public:
    CoarseModel(const CalibrationProblem& problem, const Eigen::MatrixXd& half_modes, const Eigen::MatrixXd& xi_block);

    /// Predicted frames n >= 2 for every scenario; frames 0 and 1 are zero.
    EnsembleMoments moments(const Eigen::VectorXd& free, double sigma) const;

    /// Installs a per-scenario mean shift and variance inflation applied by misfit(); empty vectors remove it.
    void set_bias(const std::vector<Field>& mean, const std::vector<Field>& var);
    bool has_bias() const noexcept { return !bias_mean_.empty(); }

    /// Misfit of the coarse moments, with the installed bias when `corrected`.
    double misfit(const Eigen::VectorXd& free, double sigma, double gamma, bool corrected) const;

    /// Single step-wise realization for the given xi.
    std::vector<Field> realization(const Eigen::VectorXd& free, double sigma, const Eigen::VectorXd& xi) const;

    int whitened_columns() const noexcept { return static_cast<int>(mode_table_.cols()) - 1; }

private:
    template <class Visitor>
    void evaluate(const Eigen::VectorXd& free, double sigma, const Eigen::MatrixXd& table, Visitor&& visit) const;

    const CalibrationProblem* problem_;
    Eigen::MatrixXd half_modes_;
    /// Half-grid table: column 0 = modes * mean(xi), columns 1.. = modes * V with V V^T = cov(xi).
    Eigen::MatrixXd mode_table_;
    Eigen::Index cols_per_scenario_;  ///< predicted frames per scenario (N - 2)
    /// Per interior point: bond differences [u_{i+r} - u_i | u_{i-r} - u_i] for every (s, n) column.
    std::vector<Eigen::MatrixXd> bonds_;
    /// Per interior point: 2 d^n - d^{n-1} + dt^2 f^n and the target d^{n+1}.
    std::vector<Eigen::VectorXd> base_, target_;
    /// Bias laid out like base_.
    std::vector<Eigen::VectorXd> bias_mean_, bias_var_;
    double frame_one_ = 0.0;  ///< sum of the squared frame-1 data (predicted as zero)
};

}  // namespace enor
