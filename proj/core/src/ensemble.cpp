#include "enor/ensemble.hpp"

#include <cmath>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "enor/error.hpp"
#include "enor/kle.hpp"

namespace enor {

CalibrationProblem::CalibrationProblem(const WaveDataset& data, int degree, double horizon,
                                       const PhysicsTargets& targets)
    : data_(data),
      grid_(SolverGrid::make(data.length(), data.dx, data.dt, horizon)),
      degree_(degree),
      targets_(targets) {
    data_.validate();
    targets_.validate();
    if (degree_ < 2) throw InvalidArgument("kernel degree M must be at least 2");
    if (data_.scenario_count() == 0) throw InvalidArgument("calibration needs at least one scenario");
    if (grid_.points() != data_.points())
        throw InvalidArgument(fmt::format("dataset has {} points, solver grid {}", data_.points(), grid_.points()));
    if (data_.frames() < 3) throw InvalidArgument("calibration needs at least three frames");
    map_ = constraint_map(degree_, horizon, data_.dx, targets_);
    basis_ = stencil_basis(degree_, horizon, data_.dx);
    forcing_.reserve(scenario_count());
    energy_.reserve(scenario_count());
    for (std::size_t s = 0; s < scenario_count(); ++s) {
        forcing_.push_back(sample_forcing(grid_, data_.scenarios[s], frames()));
        energy_.push_back(data_.u[s].middleCols(grid_.interior_begin(), grid_.interior_size()).squaredNorm());
        if (!(energy_.back() > 0.0))
            throw InvalidArgument(fmt::format("scenario {} ({}) has no signal in the interior; lengthen the final time",
                                              s, data_.scenarios[s].label()));
    }
}

CollarPolicy CalibrationProblem::collar(std::size_t s) const {
    const LoadingScenario& sc = data_.scenarios.at(s);
    if (sc.force_driven()) return CollarPolicy::zero();
    return CollarPolicy::inflow([sc](double t) { return inlet_displacement(sc, t); }, targets_.c0);
}

Eigen::VectorXd CalibrationProblem::full_coefficients(const Eigen::VectorXd& free) const {
    if (free.size() != free_count())
        throw InvalidArgument(fmt::format("expected {} free coefficients, got {}", free_count(), free.size()));
    Eigen::VectorXd c(degree_ + 1);
    c.head(degree_ - 1) = free;
    c.tail(2) = map_.offset + map_.jacobian * free;
    return c;
}

KernelCoeffs CalibrationProblem::kernel(const Eigen::VectorXd& free) const {
    KernelCoeffs k;
    k.degree = degree_;
    k.horizon = grid_.horizon;
    k.dx = grid_.dx;
    k.C = full_coefficients(free);
    k.targets = targets_;
    return k;
}

Eigen::VectorXd CalibrationProblem::stencil(const Eigen::VectorXd& free) const {
    Eigen::VectorXd k = basis_ * full_coefficients(free);
    k(0) = 0.0;
    return k;
}

Field CalibrationProblem::rollout(const NonlocalOperator& op, std::size_t s) const {
    return solve_trajectory(op, frames(), forcing_[s], collar(s));
}

double abc_misfit(const SolverGrid& grid, const Field& mean, const Field& sd, const Field& data, double gamma) {
    const Eigen::Index b = grid.interior_begin();
    const Eigen::Index w = grid.interior_size();
    const Eigen::Index rows = data.rows() - 1;
    const auto err = (mean.block(1, b, rows, w) - data.block(1, b, rows, w)).array();
    return err.square().sum() + (sd.block(1, b, rows, w).array() - gamma * err.abs()).square().sum();
}

EnsembleMoments fine_moments(const CalibrationProblem& problem, const Eigen::VectorXd& free, double sigma,
                             const Eigen::MatrixXd& half_modes, const Eigen::MatrixXd& xi_block,
                             const std::function<void(int, std::size_t, const Field&)>& visit) {
    const auto kcount = static_cast<int>(xi_block.rows());
    if (kcount < 1) throw InvalidArgument("ensemble needs at least one realization");
    const std::size_t ns = problem.scenario_count();
    NonlocalOperator op(problem.grid(), problem.stencil(free));
    EnsembleMoments m;
    std::vector<Field> m2(ns);
    m.mean.resize(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        m.mean[s] = Field::Zero(problem.frames(), problem.grid().points());
        m2[s] = m.mean[s];
    }
    for (int k = 0; k < kcount; ++k) {
        op.set_correction(sample_field(half_modes, sigma, xi_block.row(k).transpose()));
        for (std::size_t s = 0; s < ns; ++s) {
            const Field u = problem.rollout(op, s);
            if (visit) visit(k, s, u);
            const Field delta = u - m.mean[s];
            m.mean[s] += delta / static_cast<double>(k + 1);
            m2[s].array() += delta.array() * (u - m.mean[s]).array();
        }
    }
    m.sd.resize(ns);
    for (std::size_t s = 0; s < ns; ++s)
        m.sd[s] = kcount > 1 ? Field((m2[s].array() / (kcount - 1)).sqrt()) : Field(Field::Zero(m2[s].rows(), m2[s].cols()));
    return m;
}

CoarseModel::CoarseModel(const CalibrationProblem& problem, const Eigen::MatrixXd& half_modes,
                         const Eigen::MatrixXd& xi_block)
    : problem_(&problem), half_modes_(half_modes) {
    const SolverGrid& g = problem.grid();
    if (half_modes.rows() != g.half_points()) throw InvalidArgument("KLE modes do not match the half grid");
    if (xi_block.cols() != half_modes.cols()) throw InvalidArgument("xi block width differs from the KLE truncation");
    if (xi_block.rows() < 1) throw InvalidArgument("ensemble needs at least one realization");

    const Eigen::Index kcount = xi_block.rows();
    const Eigen::VectorXd xbar = xi_block.colwise().mean().transpose();
    Eigen::MatrixXd factor(half_modes.cols(), 0);
    if (kcount > 1) {
        const Eigen::MatrixXd centred = xi_block.rowwise() - xbar.transpose();
        Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
        const Eigen::VectorXd sv = svd.singularValues();
        Eigen::Index rank = 0;
        while (rank < sv.size() && sv(rank) > 1e-12 * sv(0)) ++rank;
        factor = svd.matrixV().leftCols(rank) * (sv.head(rank) / std::sqrt(static_cast<double>(kcount - 1))).asDiagonal();
    }
    mode_table_.resize(half_modes.rows(), 1 + factor.cols());
    mode_table_.col(0) = half_modes * xbar;
    mode_table_.rightCols(factor.cols()) = half_modes * factor;

    const Eigen::Index frames = problem.frames();
    const int radius = g.radius;
    cols_per_scenario_ = frames - 2;
    const Eigen::Index ncols = cols_per_scenario_ * static_cast<Eigen::Index>(problem.scenario_count());
    const double dt2 = g.dt * g.dt;
    const Eigen::Index ni = g.interior_size();
    bonds_.assign(static_cast<std::size_t>(ni), Eigen::MatrixXd(ncols, 2 * radius));
    base_.assign(static_cast<std::size_t>(ni), Eigen::VectorXd(ncols));
    target_.assign(static_cast<std::size_t>(ni), Eigen::VectorXd(ncols));
    for (std::size_t s = 0; s < problem.scenario_count(); ++s) {
        const Field& d = problem.data(s);
        const Field& f = problem.forcing(s);
        for (Eigen::Index n = 1; n + 1 < frames; ++n) {
            const Eigen::Index c = static_cast<Eigen::Index>(s) * cols_per_scenario_ + (n - 1);
            for (Eigen::Index ii = 0; ii < ni; ++ii) {
                const Eigen::Index i = g.interior_begin() + ii;
                auto& bond = bonds_[static_cast<std::size_t>(ii)];
                for (int r = 1; r <= radius; ++r) {
                    bond(c, r - 1) = d(n, i + r) - d(n, i);
                    bond(c, radius + r - 1) = d(n, i - r) - d(n, i);
                }
                base_[static_cast<std::size_t>(ii)](c) =
                    2.0 * d(n, i) - d(n - 1, i) + (f.size() ? dt2 * f(n, i) : 0.0);
                target_[static_cast<std::size_t>(ii)](c) = d(n + 1, i);
            }
        }
        frame_one_ += d.row(1).segment(g.interior_begin(), ni).squaredNorm();
    }
}

template <class Visitor>
void CoarseModel::evaluate(const Eigen::VectorXd& free, double sigma, const Eigen::MatrixXd& table,
                           Visitor&& visit) const {
    const SolverGrid& g = problem_->grid();
    const Eigen::VectorXd w = g.dx * problem_->stencil(free);
    const int radius = g.radius;
    const double dt2 = g.dt * g.dt;
    const Eigen::Index p = table.cols() - 1;
    Eigen::MatrixXd rhs(2 * radius, p + 2);
    Eigen::MatrixXd prod;
    Eigen::VectorXd mean, var;
    for (Eigen::Index ii = 0; ii < g.interior_size(); ++ii) {
        const Eigen::Index i = g.interior_begin() + ii;
        for (int r = 1; r <= radius; ++r) {
            rhs(r - 1, 0) = w(r);
            rhs.row(r - 1).tail(p + 1) = (w(r) * sigma) * table.row(2 * i + r);
            rhs(radius + r - 1, 0) = w(r);
            rhs.row(radius + r - 1).tail(p + 1) = (w(r) * sigma) * table.row(2 * i - r);
        }
        prod.noalias() = bonds_[static_cast<std::size_t>(ii)] * rhs;
        mean = base_[static_cast<std::size_t>(ii)] + dt2 * (prod.col(0) + prod.col(1));
        if (p > 0)
            var = (dt2 * dt2) * prod.rightCols(p).rowwise().squaredNorm();
        else
            var.setZero(mean.size());
        visit(ii, i, mean, var);
    }
}

EnsembleMoments CoarseModel::moments(const Eigen::VectorXd& free, double sigma) const {
    const SolverGrid& g = problem_->grid();
    const std::size_t ns = problem_->scenario_count();
    EnsembleMoments m;
    m.mean.assign(ns, Field::Zero(problem_->frames(), g.points()));
    m.sd.assign(ns, Field::Zero(problem_->frames(), g.points()));
    evaluate(free, sigma, mode_table_,
             [&](Eigen::Index, Eigen::Index i, const Eigen::VectorXd& mean, const Eigen::VectorXd& var) {
                 for (std::size_t s = 0; s < ns; ++s)
                     for (Eigen::Index n = 2; n < problem_->frames(); ++n) {
                         const Eigen::Index c = static_cast<Eigen::Index>(s) * cols_per_scenario_ + (n - 2);
                         m.mean[s](n, i) = mean(c);
                         m.sd[s](n, i) = std::sqrt(var(c));
                     }
             });
    return m;
}

void CoarseModel::set_bias(const std::vector<Field>& mean, const std::vector<Field>& var) {
    bias_mean_.clear();
    bias_var_.clear();
    if (mean.empty() && var.empty()) return;
    const SolverGrid& g = problem_->grid();
    const std::size_t ns = problem_->scenario_count();
    if (mean.size() != ns || var.size() != ns) throw InvalidArgument("bias fields do not match the scenario count");
    for (std::size_t s = 0; s < ns; ++s)
        if (mean[s].rows() != problem_->frames() || mean[s].cols() != g.points() || var[s].rows() != mean[s].rows() ||
            var[s].cols() != mean[s].cols())
            throw InvalidArgument("bias field shape differs from the dataset");
    const Eigen::Index ni = g.interior_size();
    bias_mean_.assign(static_cast<std::size_t>(ni), Eigen::VectorXd(base_.front().size()));
    bias_var_ = bias_mean_;
    for (Eigen::Index ii = 0; ii < ni; ++ii) {
        const Eigen::Index i = g.interior_begin() + ii;
        for (std::size_t s = 0; s < ns; ++s)
            for (Eigen::Index n = 2; n < problem_->frames(); ++n) {
                const Eigen::Index c = static_cast<Eigen::Index>(s) * cols_per_scenario_ + (n - 2);
                bias_mean_[static_cast<std::size_t>(ii)](c) = mean[s](n, i);
                bias_var_[static_cast<std::size_t>(ii)](c) = var[s](n, i);
            }
    }
}

double CoarseModel::misfit(const Eigen::VectorXd& free, double sigma, double gamma, bool corrected) const {
    const bool use_bias = corrected && has_bias();
    double total = (1.0 + gamma * gamma) * frame_one_;
    evaluate(free, sigma, mode_table_,
             [&](Eigen::Index ii, Eigen::Index, const Eigen::VectorXd& mean, const Eigen::VectorXd& var) {
                 const auto k = static_cast<std::size_t>(ii);
                 Eigen::ArrayXd err = mean.array() - target_[k].array();
                 Eigen::ArrayXd spread;
                 if (use_bias) {
                     err += bias_mean_[k].array();
                     spread = (var.array() + bias_var_[k].array()).sqrt();
                 } else {
                     spread = var.array().sqrt();
                 }
                 total += err.square().sum() + (spread - gamma * err.abs()).square().sum();
             });
    if (!std::isfinite(total)) throw SolverDivergence(-1, -1);
    return total;
}

std::vector<Field> CoarseModel::realization(const Eigen::VectorXd& free, double sigma, const Eigen::VectorXd& xi) const {
    if (xi.size() != half_modes_.cols()) throw InvalidArgument("xi length differs from the KLE truncation");
    const SolverGrid& g = problem_->grid();
    const std::size_t ns = problem_->scenario_count();
    const Eigen::MatrixXd table = half_modes_ * xi;
    std::vector<Field> out(ns, Field::Zero(problem_->frames(), g.points()));
    evaluate(free, sigma, table, [&](Eigen::Index, Eigen::Index i, const Eigen::VectorXd& mean, const Eigen::VectorXd&) {
        for (std::size_t s = 0; s < ns; ++s)
            for (Eigen::Index n = 2; n < problem_->frames(); ++n)
                out[s](n, i) = mean(static_cast<Eigen::Index>(s) * cols_per_scenario_ + (n - 2));
    });
    for (std::size_t s = 0; s < ns; ++s)
        for (Eigen::Index n = 2; n < problem_->frames(); ++n)
            for (Eigen::Index i = 0; i < g.collar; ++i) {
                out[s](n, i) = problem_->data(s)(n, i);
                out[s](n, g.points() - 1 - i) = problem_->data(s)(n, g.points() - 1 - i);
            }
    return out;
}

}  // namespace enor
