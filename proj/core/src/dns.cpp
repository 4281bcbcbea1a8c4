#include "enor/dns.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "enor/error.hpp"

namespace enor {

namespace {

// Three-point Gauss-Legendre rule on [0, 1].
constexpr double kGaussNode[3] = {0.5 - 0.3872983346207417, 0.5, 0.5 + 0.3872983346207417};
constexpr double kGaussWeight[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

double eval_or_zero(const std::function<double(double)>& f, double t) { return f ? f(t) : 0.0; }

}  // namespace

CharacteristicSolver::CharacteristicSolver(const Microstructure& micro, double internal_dt) : dtau_(internal_dt) {
    micro.validate();
    if (!(internal_dt > 0.0)) throw InvalidArgument("internal time step must be positive");
    layers_.reserve(micro.layer_count());
    for (std::size_t l = 0; l < micro.layer_count(); ++l) {
        Layer layer;
        layer.x0 = micro.interfaces[l];
        layer.c = micro.wave_speed(l);
        layer.z = micro.impedance(l);
        const double traversal = micro.width(l) / layer.c;
        layer.cells = static_cast<std::size_t>(std::max(1.0, std::round(traversal / dtau_)));
        layer.h = micro.width(l) / static_cast<double>(layer.cells);
        layer.r.assign(layer.cells + 1, 0.0);
        layer.g.assign(layer.cells + 1, 0.0);
        total_nodes_ += layer.cells + 1;
        layers_.push_back(std::move(layer));
    }
}

std::pair<double, double> CharacteristicSolver::interface_state(double z_left, double z_right, double a, double b) {
    const double zs = z_left + z_right;
    return {(b - a) / zs, (z_right * a + z_left * b) / zs};
}

double CharacteristicSolver::source_integral(const Sources& s, double xa, double xb) const {
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double theta = kGaussNode[k];
        sum += kGaussWeight[k] * s.force(xa + theta * (xb - xa), time_ + theta * dtau_);
    }
    return sum * dtau_;
}

void CharacteristicSolver::advance(const Sources& sources) {
    const bool forced = static_cast<bool>(sources.force);
    for (auto& layer : layers_) {
        const std::size_t n = layer.cells;
        auto& r = layer.r;
        auto& g = layer.g;
        if (forced) {
            for (std::size_t j = n; j >= 1; --j) {
                const double xa = layer.x0 + static_cast<double>(j - 1) * layer.h;
                r[j] = r[j - 1] - layer.c * source_integral(sources, xa, xa + layer.h);
            }
            for (std::size_t j = 0; j < n; ++j) {
                const double xa = layer.x0 + static_cast<double>(j + 1) * layer.h;
                g[j] = g[j + 1] + layer.c * source_integral(sources, xa, xa - layer.h);
            }
        } else {
            std::move_backward(r.begin(), r.end() - 1, r.end());
            std::move(g.begin() + 1, g.end(), g.begin());
        }
    }

    ++steps_;
    const double t_new = static_cast<double>(steps_) * dtau_;
    for (std::size_t l = 1; l < layers_.size(); ++l) {
        Layer& lhs = layers_[l - 1];
        Layer& rhs = layers_[l];
        auto [w, q] = interface_state(lhs.z, rhs.z, lhs.r[lhs.cells], rhs.g[0]);
        lhs.g[lhs.cells] = q + lhs.z * w;
        rhs.r[0] = q - rhs.z * w;
    }
    Layer& first = layers_.front();
    first.r[0] = first.g[0] - 2.0 * first.z * eval_or_zero(sources.left, t_new);
    Layer& last = layers_.back();
    last.g[last.cells] = last.r[last.cells] + 2.0 * last.z * eval_or_zero(sources.right, t_new);

    time_ = t_new;
}

CharacteristicSolver::Stencil CharacteristicSolver::locate(double x) const {
    auto it = std::upper_bound(layers_.begin(), layers_.end(), x,
                               [](double v, const Layer& layer) { return v < layer.x0; });
    std::size_t l = (it == layers_.begin()) ? 0 : static_cast<std::size_t>(it - layers_.begin()) - 1;
    const Layer& layer = layers_[l];
    const double s = (x - layer.x0) / layer.h;
    const double fl = std::clamp(std::floor(s), 0.0, static_cast<double>(layer.cells - 1));
    return {l, static_cast<std::size_t>(fl), std::clamp(s - fl, 0.0, 1.0)};
}

double CharacteristicSolver::sample(const Stencil& s) const {
    const Layer& layer = layers_[s.layer];
    const double w0 = (layer.g[s.node] - layer.r[s.node]) / (2.0 * layer.z);
    const double w1 = (layer.g[s.node + 1] - layer.r[s.node + 1]) / (2.0 * layer.z);
    return w0 + s.weight * (w1 - w0);
}

double CharacteristicSolver::value_at(double x) const { return sample(locate(x)); }

double CharacteristicSolver::flux_at(double x) const {
    const Stencil s = locate(x);
    const Layer& layer = layers_[s.layer];
    const double q0 = 0.5 * (layer.r[s.node] + layer.g[s.node]);
    const double q1 = 0.5 * (layer.r[s.node + 1] + layer.g[s.node + 1]);
    return q0 + s.weight * (q1 - q0);
}

double CharacteristicSolver::energy() const {
    double e = 0.0;
    for (const auto& layer : layers_) {
        double sum = 0.0;
        for (std::size_t j = 0; j < layer.cells; ++j) sum += layer.r[j] * layer.r[j];
        for (std::size_t j = 1; j <= layer.cells; ++j) sum += layer.g[j] * layer.g[j];
        e += dtau_ / (4.0 * layer.z) * sum;
    }
    return e;
}

double dns_internal_step(const Microstructure& micro, const DnsOptions& options) {
    if (!(options.dt > 0.0)) throw InvalidArgument("output time step must be positive");
    if (options.min_steps_per_layer < 1) throw InvalidArgument("min_steps_per_layer must be >= 1");
    std::vector<double> traversal;
    for (std::size_t l = 0; l < micro.layer_count(); ++l) traversal.push_back(micro.width(l) / micro.wave_speed(l));
    std::vector<double> sorted = traversal;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    // A clipped final layer can be a sliver; it gets a single cell instead of
    // dictating the step for the whole bar.
    const double reference = std::max(*std::min_element(traversal.begin(), traversal.end()), 0.25 * median);
    const double ratio = options.dt * options.min_steps_per_layer / reference;
    const double q = std::max(1.0, std::ceil(ratio - 1e-9));
    return options.dt / q;
}

std::vector<double> uniform_grid(double length, double dx) {
    if (!(length > 0.0) || !(dx > 0.0)) throw InvalidArgument("grid length and spacing must be positive");
    const double cells = std::round(length / dx);
    if (cells < 1.0 || std::abs(cells * dx - length) > 1e-9 * length)
        throw InvalidArgument(fmt::format("bar length {} is not a multiple of dx = {}", length, dx));
    const auto n = static_cast<std::size_t>(cells);
    std::vector<double> x(n + 1);
    for (std::size_t i = 0; i <= n; ++i) x[i] = -0.5 * length + static_cast<double>(i) * dx;
    x.back() = 0.5 * length;
    return x;
}

Field dns_solve(const Microstructure& micro, const LoadingScenario& scenario, const DnsOptions& options) {
    scenario.validate();
    micro.validate();
    if (std::abs(scenario.length - micro.length()) > 1e-9 * micro.length())
        throw InvalidArgument("scenario and microstructure disagree on the bar length");
    if (!(options.final_time > 0.0)) throw InvalidArgument("final time must be positive");
    const double frames_d = std::round(options.final_time / options.dt);
    if (std::abs(frames_d * options.dt - options.final_time) > 1e-9 * options.final_time)
        throw InvalidArgument("final time must be a multiple of dt");

    const double dtau = dns_internal_step(micro, options);
    const int per_frame = static_cast<int>(std::lround(options.dt / dtau));
    const auto frames = static_cast<Eigen::Index>(frames_d) + 1;
    const std::vector<double> x = uniform_grid(micro.length(), options.dx);

    CharacteristicSolver solver(micro, dtau);
    std::vector<CharacteristicSolver::Stencil> stencils;
    stencils.reserve(x.size());
    for (double xi : x) stencils.push_back(solver.locate(xi));

    CharacteristicSolver::Sources sources;
    const bool displacement = options.field == DnsField::Displacement;
    if (scenario.force_driven()) {
        if (displacement)
            sources.force = [&scenario](double xx, double t) { return forcing_time_integral(scenario, xx, t); };
        else
            sources.force = [&scenario](double xx, double t) { return forcing_eval(scenario, xx, t); };
    } else if (!displacement) {
        sources.left = [&scenario](double t) { return inlet_velocity(scenario, t); };
    } else if (scenario.kind == LoadingKind::WavePacket) {
        sources.left = RunningIntegral([&scenario](double t) { return inlet_velocity(scenario, t); });
    } else {
        sources.left = [&scenario](double t) { return inlet_displacement(scenario, t); };
    }

    Field out = Field::Zero(frames, static_cast<Eigen::Index>(x.size()));
    for (Eigen::Index n = 1; n < frames; ++n) {
        for (int k = 0; k < per_frame; ++k) solver.advance(sources);
        for (std::size_t i = 0; i < stencils.size(); ++i) out(n, static_cast<Eigen::Index>(i)) = solver.sample(stencils[i]);
        if (!out.row(n).allFinite())
            throw NumericalError(fmt::format("DNS produced a non-finite state at frame {} ({})", n, scenario.label()));
    }
    return out;
}

}  // namespace enor
