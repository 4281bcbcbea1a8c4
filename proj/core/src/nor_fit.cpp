#include "enor/nor_fit.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "enor/error.hpp"

namespace enor {

void FitConfig::validate() const {
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda_reg must be nonnegative");
    if (max_iterations < 1) throw InvalidArgument("fit needs at least one iteration");
    if (!adjoint && !(fd_step > 0.0)) throw InvalidArgument("finite-difference step must be positive");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Misfit of one scenario and, when requested, its gradient with respect to the stencil weights dx K(r dx).
double scenario_misfit(const CalibrationProblem& problem, const NonlocalOperator& op, std::size_t s,
                       Eigen::VectorXd* weight_gradient) {
    const SolverGrid& g = problem.grid();
    const Field u = problem.rollout(op, s);
    const Field& d = problem.data(s);
    const double scale = 1.0 / problem.data_energy(s);
    const Eigen::Index b = g.interior_begin();
    const Eigen::Index e = g.interior_end();
    const double loss = scale * (u.middleCols(b, g.interior_size()) - d.middleCols(b, g.interior_size())).squaredNorm();
    if (!weight_gradient) return loss;

    // Backward recursion a^n = dJ/du^n + (2 + dt^2 L) a^{n+1} - a^{n+2}; L is symmetric on the interior.
    const Eigen::Index frames = u.rows();
    const Eigen::Index np = g.points();
    const double dt2 = g.dt * g.dt;
    Field a = Field::Zero(frames + 2, np);
    Eigen::VectorXd la(np);
    for (Eigen::Index n = frames - 1; n >= 2; --n) {
        op.apply(a.row(n + 1).data(), la.data());
        for (Eigen::Index i = b; i < e; ++i)
            a(n, i) = 2.0 * scale * (u(n, i) - d(n, i)) + 2.0 * a(n + 1, i) + dt2 * la(i) - a(n + 2, i);
    }
    Eigen::VectorXd& gw = *weight_gradient;
    for (Eigen::Index n = 1; n + 1 < frames; ++n) {
        const double* un = u.row(n).data();
        const double* an = a.row(n + 1).data();
        for (int r = 1; r <= g.radius; ++r) {
            double acc = 0.0;
            for (Eigen::Index i = b; i < e; ++i) acc += an[i] * (un[i + r] + un[i - r] - 2.0 * un[i]);
            gw(r) += dt2 * acc;
        }
    }
    return loss;
}

}  // namespace

double nor_objective(const CalibrationProblem& problem, const Eigen::VectorXd& free, double lambda,
                     Eigen::VectorXd* gradient) {
    const Eigen::VectorXd c = problem.full_coefficients(free);
    NonlocalOperator op(problem.grid(), problem.stencil(free));
    Eigen::VectorXd gw;
    if (gradient) gw = Eigen::VectorXd::Zero(problem.grid().radius + 1);
    double loss = lambda * c.squaredNorm();
    try {
        for (std::size_t s = 0; s < problem.scenario_count(); ++s)
            loss += scenario_misfit(problem, op, s, gradient ? &gw : nullptr);
    } catch (const SolverDivergence&) {
        if (gradient) gradient->setZero(free.size());
        return kInf;
    }
    if (!std::isfinite(loss)) {
        if (gradient) gradient->setZero(free.size());
        return kInf;
    }
    if (gradient) {
        gw(0) = 0.0;
        Eigen::VectorXd gc = problem.basis().transpose() * (problem.grid().dx * gw) + 2.0 * lambda * c;
        const int m = problem.free_count();
        *gradient = gc.head(m) + problem.constraints().jacobian.transpose() * gc.tail(2);
    }
    return loss;
}

Eigen::VectorXd nor_gradient_fd(const CalibrationProblem& problem, const Eigen::VectorXd& free, double lambda,
                                double step) {
    Eigen::VectorXd grad(free.size());
    Eigen::VectorXd p = free;
    for (Eigen::Index j = 0; j < free.size(); ++j) {
        const double h = step * std::max(1.0, std::abs(free(j)));
        p(j) = free(j) + h;
        const double fp = nor_objective(problem, p, lambda);
        p(j) = free(j) - h;
        const double fm = nor_objective(problem, p, lambda);
        p(j) = free(j);
        grad(j) = (fp - fm) / (2.0 * h);
    }
    return grad;
}

namespace {

class NorFunction final : public ceres::FirstOrderFunction {
public:
    NorFunction(const CalibrationProblem& problem, const FitConfig& config) : problem_(problem), config_(config) {}

    bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
        const Eigen::Map<const Eigen::VectorXd> x(parameters, problem_.free_count());
        Eigen::VectorXd g;
        double f;
        if (!gradient) {
            f = nor_objective(problem_, x, config_.lambda);
        } else if (config_.adjoint) {
            f = nor_objective(problem_, x, config_.lambda, &g);
        } else {
            f = nor_objective(problem_, x, config_.lambda);
            if (std::isfinite(f)) g = nor_gradient_fd(problem_, x, config_.lambda, config_.fd_step);
        }
        if (!std::isfinite(f)) return false;
        *cost = f;
        if (gradient) Eigen::Map<Eigen::VectorXd>(gradient, problem_.free_count()) = g;
        return true;
    }

    int NumParameters() const override { return problem_.free_count(); }

private:
    const CalibrationProblem& problem_;
    FitConfig config_;
};

}  // namespace

FitResult fit_nor(const CalibrationProblem& problem, const FitConfig& config, const Eigen::VectorXd& start) {
    config.validate();
    Eigen::VectorXd x = start.size() ? start
                                     : minimum_norm_free(problem.targets(), problem.degree(), problem.grid().horizon,
                                                         problem.grid().dx);
    if (x.size() != problem.free_count()) throw InvalidArgument("start vector has the wrong length");
    if (!std::isfinite(nor_objective(problem, x, config.lambda)))
        throw NumericalError("NOR fit: the starting kernel makes the nonlocal solver diverge");

    ceres::GradientProblem gp(new NorFunction(problem, config));
    ceres::GradientProblemSolver::Options options;
    options.line_search_direction_type = ceres::LBFGS;
    options.max_num_iterations = config.max_iterations;
    options.gradient_tolerance = config.gradient_tolerance;
    options.function_tolerance = config.function_tolerance;
    options.parameter_tolerance = 1e-14;
    options.logging_type = ceres::SILENT;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, gp, x.data(), &summary);

    FitResult r;
    r.free = x;
    r.kernel = problem.kernel(x);
    Eigen::VectorXd grad;
    r.loss = nor_objective(problem, x, config.lambda, &grad);
    r.gradient_norm = grad.norm();
    r.iterations = static_cast<int>(summary.iterations.size()) - 1;
    r.converged = summary.termination_type == ceres::CONVERGENCE;
    r.message = summary.message;
    for (const auto& it : summary.iterations) r.loss_history.push_back(it.cost);
    return r;
}

void to_json(nlohmann::json& j, const FitResult& r) {
    j = nlohmann::json{{"loss", r.loss},
                       {"gradient_norm", r.gradient_norm},
                       {"iterations", r.iterations},
                       {"converged", r.converged},
                       {"message", r.message},
                       {"loss_history", r.loss_history},
                       {"kernel", r.kernel}};
}

SigmaInit init_sigma_gp(const CalibrationProblem& problem, const Eigen::VectorXd& free, double gamma,
                        const Eigen::MatrixXd& half_modes, const Eigen::MatrixXd& xi_block, double lo, double hi,
                        int points) {
    if (!(lo < hi)) throw InvalidArgument("ln sigma bracket must satisfy lo < hi");
    if (points < 3) throw InvalidArgument("golden-section search needs at least three evaluations");
    if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be nonnegative");
    SigmaInit out;
    auto objective = [&](double ls) {
        double v = kInf;
        try {
            const EnsembleMoments m = fine_moments(problem, free, std::exp(ls), half_modes, xi_block);
            v = 0.0;
            for (std::size_t s = 0; s < problem.scenario_count(); ++s)
                v += abc_misfit(problem.grid(), m.mean[s], m.sd[s], problem.data(s), gamma);
        } catch (const SolverDivergence&) {
        }
        out.evaluations.emplace_back(ls, v);
        return v;
    };
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - ratio * (b - a), d = a + ratio * (b - a);
    double fc = objective(c), fd = objective(d);
    for (int used = 2; used < points; ++used) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d);
        }
    }
    double fmin = kInf, fmax = -kInf;
    for (const auto& [ls, v] : out.evaluations) {
        if (v < fmin) {
            fmin = v;
            out.ln_sigma = ls;
        }
        fmax = std::max(fmax, v);
    }
    if (!std::isfinite(fmin)) throw NumericalError("sigma_gp initialization: every ensemble diverged");
    out.objective = fmin;
    if (std::isfinite(fmax) && fmax - fmin <= 1e-12 * std::max(1.0, std::abs(fmin))) {
        out.flat = true;
        out.ln_sigma = 0.5 * (lo + hi);
    }
    return out;
}

}  // namespace enor
