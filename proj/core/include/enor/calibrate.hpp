#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "enor/mcmc.hpp"
#include "enor/nor_fit.hpp"
#include "enor/posterior.hpp"

namespace enor {

/// Settings of the Bayesian phase (sigma_gp initialization, AEM and bound tuning, TLDA).
struct CalibrationSettings {
    PosteriorSpec posterior;  ///< prior_mean is overwritten by the deterministic fit
    MLDAConfig mcmc;
    std::uint64_t xi_seed = 7;
    std::uint64_t aem_seed = 11;
    std::uint64_t history_seed = 13;

    double init_lo = -9.210340371976184;  ///< ln 1e-4
    double init_hi = 0.0;
    int init_points = 16;

    int bound_probes = 8;
    double bound_tolerance = 0.1;
    int bound_rounds = 6;

    /// DE-Z noise and fallback scales as fractions of the prior scale of each parameter.
    double noise_fraction = 1e-3;
    double fallback_fraction = 0.1;
    /// Prior draws seeding the DE-Z history; 0 selects 2 * dimension.
    int history_draws = 0;
    /// Run chains on separate threads.
    bool parallel_chains = false;

    void validate() const;
};

void to_json(nlohmann::json& j, const CalibrationSettings& s);

struct CalibrationResult {
    PosteriorSpec spec;  ///< with C0 and the tuned ln sigma bounds
    SigmaInit init;
    BoundTuning tuning;
    Eigen::VectorXd start;
    std::vector<Trace> traces;
    long fine_evaluations = 0;
    long coarse_evaluations = 0;
    double seconds = 0.0;
};

void to_json(nlohmann::json& j, const CalibrationResult& r);

/// Progress messages of the long-running stages.
using ProgressSink = std::function<void(const std::string&)>;

/// Bayesian phase from a fitted C0: initializes ln sigma_gp, estimates the AEM and
/// tunes the ln sigma bounds, then runs the TLDA chains from (C0, ln sigma_0).
CalibrationResult calibrate(const CalibrationProblem& problem, const KLEBasis& basis, const Eigen::VectorXd& c0,
                            const CalibrationSettings& settings, const ProgressSink& progress = {});

/// Per-parameter prior scale: sigma_hat for the coefficients, the uniform standard
/// deviation (hi - lo) / sqrt(12) for ln sigma_gp.
Eigen::VectorXd prior_scale(const PosteriorSpec& spec, int dimension);

/// Independent prior draws (Gaussian coefficients, uniform ln sigma_gp).
std::vector<Eigen::VectorXd> prior_draws(const PosteriorSpec& spec, int count, std::uint64_t seed);

/// Parameter names C0..C{M-2}, ln_sigma_gp.
std::vector<std::string> parameter_names(int free_count);

}  // namespace enor
