#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "enor/dataset.hpp"
#include "enor/dispersion.hpp"
#include "enor/ensemble.hpp"
#include "enor/kernel.hpp"
#include "enor/rng.hpp"

namespace enor::support {

/// Periodic bar of length L with two force-driven and one velocity-driven scenario.
inline WaveDataset small_dataset(double length = 10.0, double final_time = 1.0) {
    MaterialSpec mat;
    mat.length = length;
    mat.layer = 0.2;
    std::vector<LoadingScenario> sc{LoadingScenario::oscillating_source(2, 0.2, length),
                                    LoadingScenario::oscillating_source(6, 0.2, length)};
    // Inlet-driven waves need about 2 time units to cross the 1.2-wide collar.
    if (final_time >= 3.0) sc.push_back(LoadingScenario::plane_wave_ramp(1.05, length));
    DnsOptions o;
    o.final_time = final_time;
    return generate_dataset(mat, sc, o, 1);
}

inline PhysicsTargets periodic_targets() { return bloch_targets(bilayer_cell(0.2)); }

/// Dataset whose interior is the nonlocal rollout of the kernel `free` (collars keep the DNS values).
inline WaveDataset synthetic_dataset(const WaveDataset& dns, int degree, double horizon, const PhysicsTargets& targets,
                                     const Eigen::VectorXd& free) {
    CalibrationProblem p(dns, degree, horizon, targets);
    NonlocalOperator op(p.grid(), p.stencil(free));
    WaveDataset out = dns;
    for (std::size_t s = 0; s < out.scenario_count(); ++s) out.u[s] = p.rollout(op, s);
    return out;
}

inline std::vector<double> normal_samples(int n, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
    Rng rng = make_rng(seed);
    std::normal_distribution<double> d(mean, sd);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline std::vector<double> ar1(int n, double rho, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    double x = d(rng) / std::sqrt(1.0 - rho * rho);
    for (auto& y : v) {
        x = rho * x + d(rng);
        y = x;
    }
    return v;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("enor-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace enor::support
