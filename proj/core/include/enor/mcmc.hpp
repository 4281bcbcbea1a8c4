#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "enor/rng.hpp"

namespace enor {

/// Negative log target density; +infinity outside the support.
using Potential = std::function<double(const Eigen::VectorXd&)>;

enum class Level { Coarse, Fine };

/// Chain of draws with per-draw bookkeeping.
struct Trace {
    int chain = 0;
    std::uint64_t seed = 0;
    std::vector<Eigen::VectorXd> draws;
    std::vector<double> log_posterior;
    std::vector<bool> accepted;
    std::vector<Level> level;
    /// Fine steps whose coarse subchain never moved (accepted with ratio 1).
    std::vector<bool> auto_accepted;
    /// Fraction of accepted coarse steps in the subchain that produced each fine draw.
    std::vector<double> subchain_acceptance;
    double gamma_de = 0.0;
    double final_scale = 1.0;
    int burn_in = 0;

    std::size_t size() const noexcept { return draws.size(); }
    int dimension() const { return draws.empty() ? 0 : static_cast<int>(draws.front().size()); }
    void push(const Eigen::VectorXd& x, double log_post, bool acc, Level lvl);
    /// Accepted fraction over draws [from, size).
    double acceptance_rate(std::size_t from = 0) const;
    /// Draws from `burn` onward; metadata kept.
    Trace after_burn_in(std::size_t burn) const;
    /// Draws as rows.
    Eigen::MatrixXd matrix() const;
    /// Throws InvalidArgument when the bookkeeping invariants fail.
    void validate() const;
};

void to_json(nlohmann::json& j, const Trace& t);
/// CSV: one row per draw with parameters, log posterior, accept flag, level.
void write_trace_csv(const Trace& t, const std::string& path, const std::vector<std::string>& names);
Trace read_trace_csv(const std::string& path);

struct Move {
    Eigen::VectorXd x;
    double potential = 0.0;
    bool accepted = false;
};

/// Metropolis-Hastings with a symmetric proposal; proposals with infinite potential are rejected.
Move mh_step(const Eigen::VectorXd& x, double potential_x, const Potential& target,
             const std::function<Eigen::VectorXd(const Eigen::VectorXd&, Rng&)>& propose, Rng& rng);

/// Same with an asymmetric proposal; `log_q(a, b)` is log q(a | b).
Move mh_step(const Eigen::VectorXd& x, double potential_x, const Potential& target,
             const std::function<Eigen::VectorXd(const Eigen::VectorXd&, Rng&)>& propose,
             const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& log_q, Rng& rng);

/// theta' = theta + gamma (z_a - z_b) + noise * N(0, I) with z_a != z_b drawn from `history`.
/// Fewer than two distinct history entries fall back to the Gaussian part alone
/// (scaled by `fallback` instead of `noise`).
Move demetropolis_z_step(const Eigen::VectorXd& x, double potential_x, const std::vector<Eigen::VectorXd>& history,
                         const Potential& target, double gamma, const Eigen::VectorXd& noise,
                         const Eigen::VectorXd& fallback, Rng& rng);

/// 2.38 / sqrt(2 d).
double default_gamma_de(int dimension);

struct DEMZOptions {
    double gamma = 0.0;        ///< 0 selects default_gamma_de
    Eigen::VectorXd noise;     ///< epsilon_de per dimension
    Eigen::VectorXd fallback;  ///< Gaussian scale used while the history is degenerate
    int burn_in = 0;           ///< scale adaptation toward `target_acceptance` while step < burn_in
    double target_acceptance = 0.234;
    double drop_fraction = 0.9;  ///< share of the burn-in history discarded when burn-in ends
};

/// Single-level DEMetropolis-Z chain; every state is appended to the history.
Trace run_demz(const Potential& target, const Eigen::VectorXd& x0, int steps, const DEMZOptions& options,
               std::uint64_t seed, std::vector<Eigen::VectorXd> history = {});

/// Random-walk Metropolis with N(0, diag(scale^2)) proposals.
Trace run_mh(const Potential& target, const Eigen::VectorXd& x0, int steps, const Eigen::VectorXd& scale,
             std::uint64_t seed);

struct MLDAConfig {
    int draws = 4000;
    int burn_in = 300;
    int nsub = 100;
    int chains = 6;
    std::uint64_t seed = 0;
    DEMZOptions coarse;  ///< subchain sampler settings (burn_in is taken from this struct)
    /// When positive, burn-in adapts the subchain jump scale toward this fine-level
    /// acceptance instead of the coarse target of `coarse`. Auto-accepted steps of a
    /// frozen subchain count as rejections here.
    double fine_target_acceptance = 0.0;

    void validate() const;
};

/// One coarse step from (x, potential) on the coarse target.
using CoarseStep = std::function<Move(const Eigen::VectorXd&, double, Rng&)>;

struct TldaCallbacks {
    /// Called after every fine step with (index, state, accepted, subchain acceptance fraction).
    std::function<void(int, const Eigen::VectorXd&, bool, double)> after_fine_step;
};

/// Two-level delayed acceptance: each fine step runs `nsub` coarse steps from the
/// current fine state and accepts the endpoint with
/// min{1, pi_f(new) pi_c(old) / (pi_f(old) pi_c(new))}.
Trace tlda_run(const Potential& fine, const Potential& coarse, const CoarseStep& step, const Eigen::VectorXd& x0,
               int draws, int nsub, Rng& rng, const TldaCallbacks& callbacks = {});

/// TLDA with DEMetropolis-Z subchains. The DE history (seeded with `history`
/// plus the accepted fine states) is frozen during each subchain and pruned by
/// `drop_fraction` halfway through burn-in; the jump scale adapts toward the
/// target coarse (or fine) acceptance during burn-in only.
Trace tlda_demz_run(const Potential& fine, const Potential& coarse, const Eigen::VectorXd& x0,
                    const MLDAConfig& config, int chain, std::vector<Eigen::VectorXd> history = {});

}  // namespace enor
