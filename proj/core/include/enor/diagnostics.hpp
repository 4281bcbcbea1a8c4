#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "enor/ensemble.hpp"
#include "enor/kle.hpp"
#include "enor/mcmc.hpp"

namespace enor {

struct Statistic {
    double value = 0.0;
    bool defined = true;  ///< false for degenerate input (zero variance)
};

/// Split rank-normalized R-hat: chains halved, pooled draws replaced by normal
/// scores of their fractional ranks, then the classic between/within ratio.
Statistic rhat(const std::vector<std::vector<double>>& chains);
/// Same on the folded draws |x - median|, sensitive to scale differences.
Statistic rhat_folded(const std::vector<std::vector<double>>& chains);

/// Autocovariance-based ESS with Geyer's initial monotone positive sequence;
/// several chains are combined through the between/within variance.
Statistic ess(const std::vector<std::vector<double>>& chains);

/// Parameter `index` of every trace.
std::vector<std::vector<double>> parameter_chains(const std::vector<Trace>& traces, int index);

struct ConvergenceReport {
    std::vector<Statistic> rhat, rhat_folded, ess;
    double max_rhat = 0.0;
    double min_ess = 0.0;
    std::size_t total_draws = 0;
    std::vector<double> acceptance;  ///< per chain, post burn-in
};

/// Diagnostics of post-burn-in traces (equal lengths required for R-hat). R-hat needs
/// four draws per chain and ESS ten; shorter traces leave them undefined.
ConvergenceReport convergence_report(const std::vector<Trace>& traces);
void to_json(nlohmann::json& j, const ConvergenceReport& r);

/// mean |X - y| - (1/2) mean over all ordered pairs |X_a - X_b|.
double crps(std::vector<double> samples, double truth);
/// mean |X - y| + mean X - 2 mean X H(X) with H the mid-step empirical CDF.
double crps_pwm(std::vector<double> samples, double truth);

enum class PushForwardMode { Full, GpOnly, ParamOnly };
std::string to_string(PushForwardMode mode);
PushForwardMode push_forward_mode_from_string(const std::string& name);

struct PushForwardOptions {
    int param_samples = 100;
    int gp_per_param = 100;
    std::uint64_t seed = 0;
    std::vector<Eigen::Index> frames;  ///< frames kept; empty keeps the last frame
    bool zero_xi = false;              ///< force xi = 0 in every realization
};

/// Pointwise predictive statistics on the kept frames (rows) of one scenario.
struct Band {
    Field mean, sd, lo68, hi68, lo95, hi95;
};

struct PushForwardSummary {
    PushForwardMode mode = PushForwardMode::Full;
    std::vector<Eigen::Index> frames;
    /// samples[s][f]: realizations x points at kept frame f of scenario s.
    std::vector<std::vector<Eigen::MatrixXd>> samples;
    std::vector<Band> bands;
    int realizations = 0;
    int diverged = 0;
};

/// Parameter draws spread evenly over the pooled traces.
std::vector<Eigen::VectorXd> thin_draws(const std::vector<Trace>& traces, int count);

/// Rolls out the embedded model on every scenario of `problem` for parameter draws
/// theta = (free coefficients, ln sigma_gp) and summarizes the kept frames.
PushForwardSummary push_forward(const CalibrationProblem& problem, const KLEBasis& basis,
                                const std::vector<Eigen::VectorXd>& draws, PushForwardMode mode,
                                const PushForwardOptions& options);

/// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> v, double p);
Band summarize(const std::vector<Eigen::MatrixXd>& frame_samples);

/// Mean over interior points of the pointwise CRPS at kept frame `f` of scenario `s`.
double average_crps(const PushForwardSummary& pf, const CalibrationProblem& problem, std::size_t s, std::size_t f);

/// Fraction of interior points at kept frame f whose truth lies in the 95% band.
double band_coverage(const PushForwardSummary& pf, const CalibrationProblem& problem, std::size_t s, std::size_t f);

/// CSV rows (x, mean, lo68, hi68, lo95, hi95) for one scenario and kept frame.
void write_band_csv(const std::string& path, const std::vector<double>& x, const Band& band, Eigen::Index row);

struct DispersionBand {
    std::vector<double> k;
    std::vector<double> lo95, median, hi95;
};
/// Analytic group velocity of the bare kernel for each parameter draw, summarized per wavenumber.
DispersionBand group_velocity_band(const CalibrationProblem& problem, const std::vector<Eigen::VectorXd>& draws,
                                   double k_max, int samples);

}  // namespace enor
