#include "enor/kernel.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "enor/error.hpp"

namespace enor {

void PhysicsTargets::validate() const {
    if (!(density > 0.0)) throw InvalidArgument("physics targets: density must be positive");
    if (!(c0 > 0.0)) throw InvalidArgument("physics targets: c0 must be positive");
    if (!std::isfinite(R)) throw InvalidArgument("physics targets: R must be finite");
}

double bernstein(int m, int degree, double z) {
    if (m < 0 || m > degree) return 0.0;
    return bernstein_basis(degree, z)(m);
}

Eigen::VectorXd bernstein_basis(int degree, double z) {
    if (degree < 0) throw InvalidArgument("Bernstein degree must be nonnegative");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(degree + 1);
    b(0) = 1.0;
    const double w = 1.0 - z;
    for (int d = 1; d <= degree; ++d) {
        for (int m = d; m >= 1; --m) b(m) = w * b(m) + z * b(m - 1);
        b(0) *= w;
    }
    return b;
}

int KernelCoeffs::stencil_radius() const { return static_cast<int>(std::floor(horizon / dx + 1e-9)); }

double kernel_eval(const KernelCoeffs& k, double r) {
    if (r < 0.0 || r > k.horizon * (1.0 + 1e-12)) return 0.0;
    const double d3 = k.horizon * k.horizon * k.horizon;
    return bernstein_basis(k.degree, std::min(1.0, r / k.horizon)).dot(k.C) / d3;
}

Eigen::MatrixXd stencil_basis(int degree, double horizon, double dx) {
    const int rmax = static_cast<int>(std::floor(horizon / dx + 1e-9));
    if (rmax < 1) throw InvalidArgument("horizon must be at least one grid spacing");
    const double d3 = horizon * horizon * horizon;
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(rmax + 1, degree + 1);
    for (int r = 1; r <= rmax; ++r) phi.row(r) = bernstein_basis(degree, std::min(1.0, r * dx / horizon)) / d3;
    return phi;
}

Eigen::VectorXd stencil_weights(const KernelCoeffs& k) { return stencil_basis(k.degree, k.horizon, k.dx) * k.C; }

double discrete_moment(const KernelCoeffs& k, int p) {
    const Eigen::VectorXd w = stencil_weights(k);
    double sum = 0.0;
    for (int r = 1; r < w.size(); ++r) sum += std::pow(r * k.dx, p) * w(r);
    return 2.0 * k.dx * sum;
}

namespace {

// Rows: second and fourth discrete moment per unit coefficient.
Eigen::MatrixXd moment_rows(int degree, double horizon, double dx) {
    const Eigen::MatrixXd phi = stencil_basis(degree, horizon, dx);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, degree + 1);
    for (int r = 1; r < phi.rows(); ++r) {
        const double z2 = (r * dx) * (r * dx);
        g.row(0) += 2.0 * dx * z2 * phi.row(r);
        g.row(1) += 2.0 * dx * z2 * z2 * phi.row(r);
    }
    return g;
}

Eigen::Vector2d moment_targets(const PhysicsTargets& t) {
    return {2.0 * t.density * t.c0 * t.c0, -8.0 * t.density * t.c0 * t.c0 * t.c0 * t.R};
}

}  // namespace

ConstraintMap constraint_map(int degree, double horizon, double dx, const PhysicsTargets& targets) {
    if (degree < 2) throw InvalidArgument("kernel degree M must be at least 2");
    targets.validate();
    const Eigen::MatrixXd g = moment_rows(degree, horizon, dx);
    const Eigen::Matrix2d a = g.rightCols(2);
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(a);
    const auto sv = svd.singularValues();
    ConstraintMap map;
    map.condition = sv(1) > 0.0 ? sv(0) / sv(1) : std::numeric_limits<double>::infinity();
    if (!(map.condition < 1e14))
        throw NumericalError(fmt::format("constraint system is singular (condition number {:.3g})", map.condition));
    const Eigen::Matrix2d inv = a.inverse();
    map.offset = inv * moment_targets(targets);
    map.jacobian = -inv * g.leftCols(degree - 1);
    return map;
}

KernelCoeffs eliminate_constraints(const Eigen::VectorXd& free, const PhysicsTargets& targets, int degree,
                                   double horizon, double dx) {
    if (free.size() != degree - 1)
        throw InvalidArgument(fmt::format("expected {} free coefficients, got {}", degree - 1, free.size()));
    const ConstraintMap map = constraint_map(degree, horizon, dx, targets);
    KernelCoeffs k;
    k.degree = degree;
    k.horizon = horizon;
    k.dx = dx;
    k.targets = targets;
    k.C.resize(degree + 1);
    k.C.head(degree - 1) = free;
    k.C.tail(2) = map.offset + map.jacobian * free;
    return k;
}

Eigen::VectorXd minimum_norm_free(const PhysicsTargets& targets, int degree, double horizon, double dx) {
    targets.validate();
    const Eigen::MatrixXd g = moment_rows(degree, horizon, dx);
    const Eigen::VectorXd c = g.transpose() * (g * g.transpose()).ldlt().solve(moment_targets(targets));
    return c.head(degree - 1);
}

Eigen::Vector2d constraint_residuals(const KernelCoeffs& k) {
    const Eigen::Vector2d t = moment_targets(k.targets);
    const Eigen::Vector2d a{discrete_moment(k, 2), discrete_moment(k, 4)};
    Eigen::Vector2d res;
    for (int i = 0; i < 2; ++i) res(i) = std::abs(a(i) - t(i)) / std::max(std::abs(t(i)), 1e-300);
    return res;
}

double stability_number(const KernelCoeffs& k, double dt) {
    return dt * dt * 2.0 * k.dx * stencil_weights(k).sum();
}

void to_json(nlohmann::json& j, const KernelCoeffs& k) {
    if (k.degree < 2 || k.C.size() != k.degree + 1) throw InvalidArgument("kernel export needs M >= 2 and M + 1 coefficients");
    const Eigen::VectorXd free = k.free_part();
    j = nlohmann::json{{"M", k.degree},
                       {"delta", k.horizon},
                       {"dx", k.dx},
                       {"free", std::vector<double>(free.data(), free.data() + free.size())},
                       {"eliminated", {k.C(k.degree - 1), k.C(k.degree)}},
                       {"targets", {{"rho", k.targets.density}, {"c0", k.targets.c0}, {"R", k.targets.R}}}};
}

void from_json(const nlohmann::json& j, KernelCoeffs& k) {
    k.degree = j.at("M").get<int>();
    k.horizon = j.at("delta").get<double>();
    k.dx = j.at("dx").get<double>();
    const auto& t = j.at("targets");
    k.targets = PhysicsTargets{t.at("rho").get<double>(), t.at("c0").get<double>(), t.at("R").get<double>()};
    const auto free = j.at("free").get<std::vector<double>>();
    const auto elim = j.at("eliminated").get<std::vector<double>>();
    if (static_cast<int>(free.size() + elim.size()) != k.degree + 1 || elim.size() != 2)
        throw InvalidArgument("kernel file: coefficient count does not match M");
    k.C.resize(k.degree + 1);
    for (std::size_t i = 0; i < free.size(); ++i) k.C(static_cast<Eigen::Index>(i)) = free[i];
    k.C(k.degree - 1) = elim[0];
    k.C(k.degree) = elim[1];
}

}  // namespace enor
