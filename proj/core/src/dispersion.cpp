#include "enor/dispersion.hpp"

#include <cmath>
#include <numbers>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <fmt/format.h>

#include "enor/dns.hpp"
#include "enor/error.hpp"
#include "enor/solver.hpp"

namespace enor {

namespace {

using Real = boost::multiprecision::cpp_bin_float_50;

struct Sums {
    double cos_part;  // sum w_r (1 - cos(k z_r))
    double sin_part;  // sum w_r z_r sin(k z_r)
};

Sums kernel_sums(const KernelCoeffs& kernel, double k) {
    const Eigen::VectorXd w = stencil_weights(kernel);
    Sums s{0.0, 0.0};
    for (int r = 1; r < w.size(); ++r) {
        const double z = r * kernel.dx;
        s.cos_part += w(r) * (1.0 - std::cos(k * z));
        s.sin_part += w(r) * z * std::sin(k * z);
    }
    // Two-sided sum: the stencil is symmetric in z.
    s.cos_part *= 2.0 * kernel.dx;
    s.sin_part *= 2.0 * kernel.dx;
    return s;
}

std::optional<Real> bloch_k_real(const Microstructure& cell, const Real& omega) {
    Real t00 = 1, t01 = 0, t10 = 0, t11 = 1;
    for (std::size_t l = 0; l < cell.layer_count(); ++l) {
        const Real e = cell.moduli[l];
        const Real c = boost::multiprecision::sqrt(e / Real(cell.density));
        const Real kappa = omega / c;
        const Real w = Real(cell.width(l));
        const Real cs = boost::multiprecision::cos(kappa * w);
        const Real sn = boost::multiprecision::sin(kappa * w);
        const Real a00 = cs, a01 = sn / (e * kappa), a10 = -e * kappa * sn, a11 = cs;
        const Real n00 = a00 * t00 + a01 * t10, n01 = a00 * t01 + a01 * t11;
        const Real n10 = a10 * t00 + a11 * t10, n11 = a10 * t01 + a11 * t11;
        t00 = n00, t01 = n01, t10 = n10, t11 = n11;
    }
    const Real half_trace = (t00 + t11) / 2;
    if (half_trace > 1 || half_trace < -1) return std::nullopt;
    return boost::multiprecision::acos(half_trace) / Real(cell.length());
}

}  // namespace

double dispersion_omega_squared(const KernelCoeffs& kernel, double k) { return kernel_sums(kernel, k).cos_part; }

DispersionValue dispersion(const KernelCoeffs& kernel, double k) {
    if (k < 0.0) throw InvalidArgument("wavenumber must be nonnegative");
    const double w2 = dispersion_omega_squared(kernel, k);
    if (w2 < 0.0) return {0.0, true};
    return {std::sqrt(w2), false};
}

GroupVelocity group_velocity(const KernelCoeffs& kernel, double k) {
    if (k < 0.0) throw InvalidArgument("wavenumber must be nonnegative");
    const Sums s = kernel_sums(kernel, k);
    if (!(s.cos_part > 0.0)) {
        if (k == 0.0) {
            // Limit k -> 0: v_g -> sqrt(A_2 / 2).
            double a2 = discrete_moment(kernel, 2);
            return {a2 > 0.0 ? std::sqrt(0.5 * a2) : 0.0, !(a2 > 0.0)};
        }
        return {0.0, true};
    }
    return {s.sin_part / (2.0 * std::sqrt(s.cos_part)), false};
}

std::vector<DispersionSample> dispersion_curve(const KernelCoeffs& kernel, double k_max, int samples) {
    if (!(k_max > 0.0) || samples < 2) throw InvalidArgument("dispersion curve needs k_max > 0 and >= 2 samples");
    std::vector<DispersionSample> out;
    out.reserve(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        const double k = k_max * i / (samples - 1);
        const DispersionValue d = dispersion(kernel, k);
        const GroupVelocity g = group_velocity(kernel, k);
        out.push_back({k, d.omega, g.vg, d.unstable});
    }
    return out;
}

std::optional<double> band_stop_frequency(const std::vector<DispersionSample>& curve) {
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const auto& a = curve[i - 1];
        const auto& b = curve[i];
        if (a.vg > 0.0 && b.vg <= 0.0) {
            const double t = a.vg / (a.vg - b.vg);
            return a.omega + t * (b.omega - a.omega);
        }
    }
    return std::nullopt;
}

std::optional<double> bloch_wavenumber(const Microstructure& cell, double omega) {
    if (omega < 0.0) throw InvalidArgument("frequency must be nonnegative");
    if (omega == 0.0) return 0.0;
    auto k = bloch_k_real(cell, Real(omega));
    if (!k) return std::nullopt;
    return static_cast<double>(*k);
}

std::optional<double> bloch_group_velocity(const Microstructure& cell, double omega) {
    const Real eps("1e-12");
    const Real w(omega);
    auto kp = bloch_k_real(cell, w + eps);
    auto km = bloch_k_real(cell, omega > 0.0 ? w - eps : w);
    if (!kp || !km) return std::nullopt;
    const Real span = omega > 0.0 ? 2 * eps : eps;
    return static_cast<double>(span / (*kp - *km));
}

PhysicsTargets bloch_targets(const Microstructure& cell) {
    cell.validate();
    PhysicsTargets t;
    t.density = cell.density;
    t.c0 = homogenized_wave_speed(cell);
    // Edge of the first Brillouin zone sets the frequency scale.
    const Real c0(t.c0);
    const Real h = Real(1e-4) * Real(std::numbers::pi) * c0 / Real(cell.length());
    auto slope = [&](const Real& w) {
        auto k = bloch_k_real(cell, w);
        if (!k) throw NumericalError("Bloch expansion frequency falls in a stop band");
        return (*k - w / c0) / (w * w * w);
    };
    const Real beta = (4 * slope(h / 2) - slope(h)) / 3;
    t.R = static_cast<double>(-6 * beta * c0 * c0);
    return t;
}

Microstructure bilayer_cell(double layer, const MaterialPair& materials) {
    Microstructure m;
    m.interfaces = {-layer, 0.0, layer};
    m.moduli = {materials.modulus1, materials.modulus2};
    m.density = materials.density;
    m.validate();
    return m;
}

namespace {

// k on the first branch of the nonlocal dispersion relation with omega(k) = omega.
double nonlocal_wavenumber(const KernelCoeffs& kernel, double omega) {
    const double k_max = std::numbers::pi / kernel.dx;
    const auto curve = dispersion_curve(kernel, k_max, 4001);
    std::size_t top = curve.size() - 1;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i].unstable) throw NumericalError("kernel is unstable below the requested frequency");
        if (curve[i].vg <= 0.0) {
            top = i;
            break;
        }
    }
    if (omega >= curve[top].omega) throw InvalidArgument(fmt::format("omega = {} lies above the band stop", omega));
    double lo = 0.0, hi = curve[top].k;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (dispersion(kernel, mid).omega < omega ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double weighted_centroid(const std::vector<double>& x, const std::vector<double>& e) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += x[i] * e[i];
        den += e[i];
    }
    if (!(den > 0.0)) throw NumericalError("wave packet carries no energy");
    return num / den;
}

}  // namespace

double nonlocal_packet_group_velocity(const KernelCoeffs& kernel, double omega, const PacketOptions& opt) {
    const SolverGrid grid = SolverGrid::make(opt.bar_length, kernel.dx, opt.dt, kernel.horizon);
    const NonlocalOperator op(grid, kernel);
    const double k0 = nonlocal_wavenumber(kernel, omega);
    const double x0 = grid.x.front() + kernel.horizon + 3.0 * opt.width;
    const double c_max = 1.2 * std::sqrt(0.5 * std::max(discrete_moment(kernel, 2), 0.0));
    if (x0 + c_max * opt.travel_time + 3.0 * opt.width > grid.x.back() - kernel.horizon)
        throw InvalidArgument("packet bar is too short for the requested travel time");

    const Eigen::Index np = grid.points();
    std::vector<double> prev(np, 0.0), cur(np, 0.0), next(np, 0.0);
    for (Eigen::Index i = grid.interior_begin(); i < grid.interior_end(); ++i) {
        const double x = grid.x[static_cast<std::size_t>(i)];
        const double env = std::exp(-std::pow((x - x0) / opt.width, 2));
        prev[i] = env * std::cos(k0 * x);
        cur[i] = env * std::cos(k0 * x - omega * opt.dt);
    }

    const auto steps = static_cast<long>(std::lround(opt.travel_time / opt.dt));
    const long first = steps / 4;
    std::vector<double> xs(grid.x.begin(), grid.x.end()), energy(np, 0.0);
    double c1 = 0.0, c2 = 0.0;
    for (long n = 1; n <= steps + 1; ++n) {
        step_accumulated(op, cur.data(), prev.data(), nullptr, next.data());
        if (n == first || n == steps) {
            // Energy density at the middle frame `cur`.
            for (Eigen::Index i = grid.interior_begin(); i < grid.interior_end(); ++i) {
                const double v = (next[i] - prev[i]) / (2.0 * opt.dt);
                double pot = 0.0;
                for (int r = 1; r <= grid.radius; ++r) {
                    const double w = op.bond(i, r);
                    const double a = cur[i + r] - cur[i], b = cur[i - r] - cur[i];
                    pot += w * (a * a + b * b);
                }
                energy[i] = 0.5 * v * v + 0.25 * pot;
            }
            (n == first ? c1 : c2) = weighted_centroid(xs, energy);
        }
        std::swap(prev, cur);
        std::swap(cur, next);
    }
    return (c2 - c1) / (static_cast<double>(steps - first) * opt.dt);
}

double dns_packet_group_velocity(const Microstructure& bar, double omega, const DnsPacketOptions& opt) {
    if (!(omega > 0.0)) throw InvalidArgument("packet frequency must be positive");
    const double tau = opt.envelope;
    DnsOptions dopt;
    dopt.dt = 0.02;
    dopt.min_steps_per_layer = opt.min_steps_per_layer;
    const double dtau = dns_internal_step(bar, dopt);
    CharacteristicSolver solver(bar, dtau);
    CharacteristicSolver::Sources src;
    src.left = [omega, tau](double t) { return std::sin(omega * t) * std::exp(-std::pow((t - 3.0 * tau) / tau, 2)); };

    const double probe = 0.05;
    std::vector<double> xs;
    std::vector<double> moduli;
    for (double x = bar.left(); x <= bar.right(); x += probe) {
        xs.push_back(x);
        moduli.push_back(bar.moduli[bar.layer_at(x)]);
    }
    auto centroid = [&] {
        std::vector<double> e(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double v = solver.value_at(xs[i]);
            const double s = solver.flux_at(xs[i]);
            e[i] = 0.5 * bar.density * v * v + 0.5 * s * s / moduli[i];
        }
        return weighted_centroid(xs, e);
    };
    const double t1 = 6.0 * tau;
    const double t2 = t1 + opt.travel_time;
    const auto steps1 = static_cast<long>(std::lround(t1 / dtau));
    const auto steps2 = static_cast<long>(std::lround(t2 / dtau));
    double c1 = 0.0;
    for (long n = 1; n <= steps2; ++n) {
        solver.advance(src);
        if (n == steps1) c1 = centroid();
    }
    const double c2 = centroid();
    if (c2 > bar.right() - 0.1 * bar.length()) throw InvalidArgument("packet reached the far end; use a longer bar");
    return (c2 - c1) / (static_cast<double>(steps2 - steps1) * dtau);
}

PhysicsTargets dns_packet_targets(const Microstructure& bar, const DnsPacketOptions& opt) {
    const double v1 = dns_packet_group_velocity(bar, 0.1, opt);
    const double v2 = dns_packet_group_velocity(bar, 0.2, opt);
    const double v3 = dns_packet_group_velocity(bar, 0.3, opt);
    PhysicsTargets t;
    t.density = bar.density;
    t.c0 = v2;
    t.R = (v1 - 2.0 * v2 + v3) / (0.1 * 0.1);
    return t;
}

}  // namespace enor
