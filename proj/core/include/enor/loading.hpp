#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace enor {

enum class LoadingKind { OscillatingSource, PlaneWaveRamp, WavePacket };

std::string to_string(LoadingKind kind);
LoadingKind loading_kind_from_string(const std::string& name);

/// One loading instance. Setting 1 (OscillatingSource) drives the bar with a
/// body force and keeps both ends fixed; settings 2 and 3 prescribe the
/// velocity of the left end and apply no body force.
struct LoadingScenario {
    LoadingKind kind = LoadingKind::OscillatingSource;
    double wavenumber_index = 1.0;  ///< k in the oscillating source
    double frequency = 0.0;         ///< omega for the velocity-driven settings
    double layer_size = 0.2;        ///< b entering the oscillating-source profile
    double t0 = 0.8;
    double tp = 0.8;
    double length = 20.0;

    static LoadingScenario oscillating_source(double k, double layer_size, double length);
    static LoadingScenario plane_wave_ramp(double omega, double length);
    static LoadingScenario wave_packet(double omega, double length);

    bool force_driven() const noexcept { return kind == LoadingKind::OscillatingSource; }
    std::string label() const;
    void validate() const;
};

/// Body force density f(x, t). Zero for the velocity-driven settings.
double forcing_eval(const LoadingScenario& scenario, double x, double t);

/// Closed form of int_0^t f(x, s) ds.
double forcing_time_integral(const LoadingScenario& scenario, double x, double t);

/// Prescribed velocity of the left end, v(-L/2, t). Zero for setting 1.
double inlet_velocity(const LoadingScenario& scenario, double t);

/// Displacement of the left end, int_0^t v(-L/2, s) ds.
double inlet_displacement(const LoadingScenario& scenario, double t);

/// Scenario grids of the three loading settings for a bar of the given length:
/// setting 1: k = 1..20; setting 2: omega = 0.35, 0.70, ..., 3.85; setting 3: omega in {2, 3.9, 5}.
std::vector<LoadingScenario> setting_scenarios(int setting, double length, double layer_size = 0.2);

/// Running integral of a scalar signal queried at non-decreasing times.
/// Each increment is integrated with a 10-point Gauss-Legendre rule.
class RunningIntegral {
public:
    explicit RunningIntegral(std::function<double(double)> integrand);
    double operator()(double t);

private:
    std::function<double(double)> integrand_;
    double last_t_ = 0.0;
    double value_ = 0.0;
};

void to_json(nlohmann::json& j, const LoadingScenario& s);
void from_json(const nlohmann::json& j, LoadingScenario& s);

}  // namespace enor
