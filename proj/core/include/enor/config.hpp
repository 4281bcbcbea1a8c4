#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "enor/calibrate.hpp"
#include "enor/dataset.hpp"
#include "enor/nor_fit.hpp"

namespace enor {

enum class TargetSource { Auto, Bloch, Packet };

/// Every constant of one experiment. Defaults reproduce the periodic-bar study.
struct ExperimentConfig {
    MaterialSpec material;

    double dx = 0.05;
    double dt = 0.02;
    double horizon = 1.2;
    int degree = 24;
    double final_time = 2.0;
    int dns_min_steps = 20;
    std::uint64_t data_seed = 1;

    std::vector<double> setting1;  ///< wavenumber indices k
    std::vector<double> setting2;  ///< ramp frequencies
    std::vector<double> setting3;  ///< packet frequencies

    /// Bloch analysis of the bilayer cell (periodic bars) or DNS packet speeds.
    TargetSource targets = TargetSource::Auto;

    FitConfig fit;
    CalibrationSettings calibration;
    /// Correlation lengths of the sweep; calibration.posterior.lgp holds the primary one.
    std::vector<double> lgp_grid;

    int predict_param_samples = 100;
    int predict_gp_per_param = 100;
    std::uint64_t predict_seed = 17;

    std::filesystem::path output_dir = "enor-run";
    std::filesystem::path data_dir;  ///< existing dataset; generated under output_dir when empty

    std::vector<LoadingScenario> scenarios() const;
    DnsOptions dns_options() const;
    bool periodic() const noexcept { return material.disorder == 0.0; }
};

ExperimentConfig default_config();

/// Parses INI text; unknown sections or keys and malformed values are collected in `errors`.
ExperimentConfig parse_config(const std::string& text, std::vector<std::string>& errors);
/// Reads and parses a file; throws InvalidArgument listing every parse error.
ExperimentConfig load_config(const std::filesystem::path& path);
/// INI text that parses back to `config`.
std::string to_ini(const ExperimentConfig& config);

/// Every violated invariant, in a stable order; empty when the config is usable.
std::vector<std::string> validate_config(const ExperimentConfig& config);

/// "2L", "L", "L/2", "L/128" or a plain number, relative to the bar length.
double parse_length_expression(const std::string& token, double length);

void to_json(nlohmann::json& j, const ExperimentConfig& c);

}  // namespace enor
