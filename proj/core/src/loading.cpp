#include "enor/loading.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "enor/error.hpp"

namespace enor {

namespace {

constexpr double kRampEnd = 15.0;
constexpr double kRampPeriod = 30.0;

double gauss_integral(const std::function<double(double)>& f, double a, double b) {
    if (b <= a) return 0.0;
    // Panels no wider than 0.5 keep the rule exact to rounding for the
    // frequencies used by the loading settings.
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / 0.5)));
    const double h = (b - a) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p)
        sum += boost::math::quadrature::gauss<double, 10>::integrate(f, a + p * h, a + (p + 1) * h);
    return sum;
}

// int_0^t (1 - cos(a s)) / a ds style helper: (1 - cos(a t)) / a, finite as a -> 0.
double one_minus_cos_over(double a, double t) {
    if (std::abs(a) * t < 1e-6) return 0.5 * a * t * t;
    return (1.0 - std::cos(a * t)) / a;
}

}  // namespace

std::string to_string(LoadingKind kind) {
    switch (kind) {
        case LoadingKind::OscillatingSource: return "oscillating_source";
        case LoadingKind::PlaneWaveRamp: return "plane_wave_ramp";
        case LoadingKind::WavePacket: return "wave_packet";
    }
    throw InvalidArgument("unknown loading kind");
}

LoadingKind loading_kind_from_string(const std::string& name) {
    if (name == "oscillating_source") return LoadingKind::OscillatingSource;
    if (name == "plane_wave_ramp") return LoadingKind::PlaneWaveRamp;
    if (name == "wave_packet") return LoadingKind::WavePacket;
    throw InvalidArgument("unknown scenario kind '" + name + "'");
}

LoadingScenario LoadingScenario::oscillating_source(double k, double layer_size, double length) {
    LoadingScenario s;
    s.kind = LoadingKind::OscillatingSource;
    s.wavenumber_index = k;
    s.layer_size = layer_size;
    s.length = length;
    s.validate();
    return s;
}

LoadingScenario LoadingScenario::plane_wave_ramp(double omega, double length) {
    LoadingScenario s;
    s.kind = LoadingKind::PlaneWaveRamp;
    s.frequency = omega;
    s.length = length;
    s.validate();
    return s;
}

LoadingScenario LoadingScenario::wave_packet(double omega, double length) {
    LoadingScenario s;
    s.kind = LoadingKind::WavePacket;
    s.frequency = omega;
    s.length = length;
    s.validate();
    return s;
}

std::string LoadingScenario::label() const {
    switch (kind) {
        case LoadingKind::OscillatingSource: return fmt::format("s1_k{:g}", wavenumber_index);
        case LoadingKind::PlaneWaveRamp: return fmt::format("s2_w{:g}", frequency);
        case LoadingKind::WavePacket: return fmt::format("s3_w{:g}", frequency);
    }
    return "unknown";
}

void LoadingScenario::validate() const {
    if (!(length > 0.0)) throw InvalidArgument("scenario length must be positive");
    if (kind == LoadingKind::OscillatingSource) {
        if (!(wavenumber_index > 0.0) || !(layer_size > 0.0) || !(tp > 0.0))
            throw InvalidArgument("oscillating source needs k > 0, b > 0, t_p > 0");
    } else if (!(frequency > 0.0)) {
        throw InvalidArgument("velocity-driven scenarios need omega > 0");
    }
}

double forcing_eval(const LoadingScenario& s, double x, double t) {
    switch (s.kind) {
        case LoadingKind::OscillatingSource: {
            const double kb = s.wavenumber_index * s.layer_size;
            const double space = 2.0 * x / (5.0 * kb);
            const double time = (t - s.t0) / s.tp;
            const double c = std::cos(2.0 * std::numbers::pi * x / kb);
            return std::exp(-space * space) * std::exp(-time * time) * c * c;
        }
        case LoadingKind::PlaneWaveRamp:
        case LoadingKind::WavePacket: return 0.0;
    }
    throw InvalidArgument("unknown scenario kind");
}

double forcing_time_integral(const LoadingScenario& s, double x, double t) {
    if (s.kind != LoadingKind::OscillatingSource) return 0.0;
    const double kb = s.wavenumber_index * s.layer_size;
    const double space = 2.0 * x / (5.0 * kb);
    const double c = std::cos(2.0 * std::numbers::pi * x / kb);
    const double temporal =
        0.5 * s.tp * std::sqrt(std::numbers::pi) * (std::erf((t - s.t0) / s.tp) + std::erf(s.t0 / s.tp));
    return std::exp(-space * space) * c * c * temporal;
}

double inlet_velocity(const LoadingScenario& s, double t) {
    switch (s.kind) {
        case LoadingKind::OscillatingSource: return 0.0;
        case LoadingKind::PlaneWaveRamp: {
            const double carrier = std::sin(s.frequency * t);
            if (t > kRampEnd) return carrier;
            const double ramp = std::sin(std::numbers::pi * t / kRampPeriod);
            return carrier * ramp * ramp;
        }
        case LoadingKind::WavePacket: {
            const double env = t / 5.0 - 3.0;
            return std::sin(s.frequency * t) * std::exp(-env * env);
        }
    }
    throw InvalidArgument("unknown scenario kind");
}

double inlet_displacement(const LoadingScenario& s, double t) {
    if (t <= 0.0) return 0.0;
    switch (s.kind) {
        case LoadingKind::OscillatingSource: return 0.0;
        case LoadingKind::PlaneWaveRamp: {
            // sin(w s) sin^2(a s) = sin(w s)/2 - [sin((w+2a)s) + sin((w-2a)s)]/4
            const double w = s.frequency;
            const double a2 = 2.0 * std::numbers::pi / kRampPeriod;
            auto ramp_part = [&](double tt) {
                return 0.5 * one_minus_cos_over(w, tt) -
                       0.25 * (one_minus_cos_over(w + a2, tt) + one_minus_cos_over(w - a2, tt));
            };
            if (t <= kRampEnd) return ramp_part(t);
            return ramp_part(kRampEnd) + (std::cos(w * kRampEnd) - std::cos(w * t)) / w;
        }
        case LoadingKind::WavePacket:
            return gauss_integral([&](double tau) { return inlet_velocity(s, tau); }, 0.0, t);
    }
    throw InvalidArgument("unknown scenario kind");
}

std::vector<LoadingScenario> setting_scenarios(int setting, double length, double layer_size) {
    std::vector<LoadingScenario> out;
    switch (setting) {
        case 1:
            for (int k = 1; k <= 20; ++k) out.push_back(LoadingScenario::oscillating_source(k, layer_size, length));
            break;
        case 2:
            for (int j = 1; j <= 11; ++j) out.push_back(LoadingScenario::plane_wave_ramp(0.35 * j, length));
            break;
        case 3:
            for (double w : {2.0, 3.9, 5.0}) out.push_back(LoadingScenario::wave_packet(w, length));
            break;
        default: throw InvalidArgument(fmt::format("unknown loading setting {}", setting));
    }
    return out;
}

RunningIntegral::RunningIntegral(std::function<double(double)> integrand) : integrand_(std::move(integrand)) {}

double RunningIntegral::operator()(double t) {
    if (t < last_t_) {
        last_t_ = 0.0;
        value_ = 0.0;
    }
    value_ += gauss_integral(integrand_, last_t_, t);
    last_t_ = t;
    return value_;
}

void to_json(nlohmann::json& j, const LoadingScenario& s) {
    j = nlohmann::json{{"kind", to_string(s.kind)},
                       {"k", s.wavenumber_index},
                       {"omega", s.frequency},
                       {"b", s.layer_size},
                       {"t0", s.t0},
                       {"tp", s.tp},
                       {"L", s.length}};
}

void from_json(const nlohmann::json& j, LoadingScenario& s) {
    s.kind = loading_kind_from_string(j.at("kind").get<std::string>());
    s.wavenumber_index = j.value("k", 1.0);
    s.frequency = j.value("omega", 0.0);
    s.layer_size = j.value("b", 0.2);
    s.t0 = j.value("t0", 0.8);
    s.tp = j.value("tp", 0.8);
    s.length = j.at("L").get<double>();
    s.validate();
}

}  // namespace enor
