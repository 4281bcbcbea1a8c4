#include "enor/kle.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "enor/error.hpp"
#include "enor/solver.hpp"

namespace enor {

namespace {

double phase_residual(double lgp, double length, double w, int i) {
    return w * length - 2.0 * std::atan(1.0 / (lgp * w)) - (i - 1) * std::numbers::pi;
}

}  // namespace

std::vector<double> solve_roots(double lgp, double length, int count) {
    if (!(lgp > 0.0) || !(length > 0.0)) throw InvalidArgument("KLE needs l_gp > 0 and L > 0");
    if (count < 0) throw InvalidArgument("root count must be nonnegative");
    std::vector<double> roots;
    roots.reserve(static_cast<std::size_t>(count));
    const double a = 1.0 / lgp;
    for (int i = 1; i <= count; ++i) {
        double lo = (i - 1) * std::numbers::pi / length;
        double hi = i * std::numbers::pi / length;
        // The phase function increases strictly from -pi at 0; each bracket holds one root.
        if (i == 1) lo = 0.0;
        double flo = i == 1 ? -std::numbers::pi : phase_residual(lgp, length, lo, i);
        double fhi = phase_residual(lgp, length, hi, i);
        if (!(flo < 0.0 && fhi > 0.0))
            throw NumericalError(fmt::format("KLE root {} not bracketed in ({}, {})", i, lo, hi));
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (phase_residual(lgp, length, mid, i) < 0.0 ? lo : hi) = mid;
        }
        double w = 0.5 * (lo + hi);
        const double step = phase_residual(lgp, length, w, i) / (length + 2.0 * a / (w * w + a * a));
        if (w - step > lo && w - step < hi) w -= step;
        roots.push_back(w);
    }
    return roots;
}

double root_residual(double lgp, double length, double w) {
    const double a2 = 1.0 / (lgp * lgp);
    return std::abs((w * w - a2) * std::tan(w * length) - 2.0 * w / lgp) / std::max(w * w, a2);
}

double KLEBasis::phi(int i, double s) const {
    const double wi = w[static_cast<std::size_t>(i)];
    return tau[static_cast<std::size_t>(i)] * (std::cos(wi * s) + std::sin(wi * s) / (lgp * wi));
}

double KLEBasis::energy_fraction() const {
    double sum = 0.0;
    for (double l : lambda) sum += l;
    return sum / length;
}

Eigen::MatrixXd KLEBasis::modes(const std::vector<double>& s) const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(s.size()), terms());
    for (int i = 0; i < terms(); ++i) {
        const double amp = std::sqrt(lambda[static_cast<std::size_t>(i)]);
        for (std::size_t j = 0; j < s.size(); ++j) m(static_cast<Eigen::Index>(j), i) = amp * phi(i, s[j]);
    }
    return m;
}

KLEBasis build_basis(double lgp, double length, double energy, int max_terms) {
    if (!(energy > 0.0 && energy < 1.0)) throw InvalidArgument("KLE energy fraction must lie in (0, 1)");
    KLEBasis b;
    b.lgp = lgp;
    b.length = length;
    double sum = 0.0;
    int chunk = 32;
    int solved = 0;
    std::vector<double> roots;
    while (sum < energy * length) {
        if (solved >= max_terms)
            throw NumericalError(fmt::format("KLE truncation needs more than {} terms for l_gp = {}; raise the budget",
                                             max_terms, lgp));
        const int want = std::min(max_terms, solved + chunk);
        roots = solve_roots(lgp, length, want);
        for (int i = solved; i < want && sum < energy * length; ++i) {
            const double w = roots[static_cast<std::size_t>(i)];
            const double lam = 2.0 * lgp / (1.0 + lgp * lgp * w * w);
            const double q = 1.0 / (lgp * w);
            const double brace = 0.5 * (length * (1.0 + q * q) + std::sin(2.0 * w * length) / (2.0 * w) * (1.0 - q * q) -
                                        (1.0 / (lgp * w * w)) * (std::cos(2.0 * w * length) - 1.0));
            b.w.push_back(w);
            b.lambda.push_back(lam);
            b.tau.push_back(1.0 / std::sqrt(brace));
            sum += lam;
        }
        solved = want;
        chunk *= 2;
    }
    return b;
}

Eigen::MatrixXd half_grid_modes(const KLEBasis& basis, const SolverGrid& grid) {
    if (std::abs(grid.length() - basis.length) > 1e-9 * basis.length)
        throw InvalidArgument("KLE basis length differs from the solver grid length");
    std::vector<double> s(static_cast<std::size_t>(grid.half_points()));
    for (Eigen::Index m = 0; m < grid.half_points(); ++m) s[static_cast<std::size_t>(m)] = grid.half_x(m) - grid.x.front();
    return basis.modes(s);
}

Eigen::VectorXd sample_field(const Eigen::MatrixXd& modes, double sigma, const Eigen::VectorXd& xi) {
    if (sigma < 0.0) throw InvalidArgument("sigma_gp must be nonnegative");
    if (xi.size() != modes.cols()) throw InvalidArgument("xi length differs from the KLE truncation");
    return (Eigen::VectorXd::Ones(modes.rows()) + sigma * (modes * xi)).eval();
}

void to_json(nlohmann::json& j, const KLEBasis& b) {
    j = nlohmann::json{{"l_gp", b.lgp}, {"L", b.length}, {"R", b.terms()}, {"w", b.w}, {"lambda", b.lambda}, {"tau", b.tau}};
}

void from_json(const nlohmann::json& j, KLEBasis& b) {
    b.lgp = j.at("l_gp").get<double>();
    b.length = j.at("L").get<double>();
    b.w = j.at("w").get<std::vector<double>>();
    b.lambda = j.at("lambda").get<std::vector<double>>();
    b.tau = j.at("tau").get<std::vector<double>>();
    const int r = j.at("R").get<int>();
    if (r != b.terms() || b.lambda.size() != b.w.size() || b.tau.size() != b.w.size())
        throw InvalidArgument("KLE cache: inconsistent array lengths");
}

}  // namespace enor
