#include "enor/calibrate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "enor/error.hpp"
#include "enor/rng.hpp"

namespace enor {

void CalibrationSettings::validate() const {
    posterior.validate();
    mcmc.validate();
    if (!(init_lo < init_hi)) throw InvalidArgument("ln sigma_gp init bracket must satisfy lo < hi");
    if (init_points < 3) throw InvalidArgument("ln sigma_gp init needs at least three points");
    if (bound_probes < 2) throw InvalidArgument("bound tuning needs at least two probes");
    if (!(bound_tolerance > 0.0)) throw InvalidArgument("bound tuning tolerance must be positive");
    if (bound_rounds < 1) throw InvalidArgument("bound tuning needs at least one round");
    if (!(noise_fraction > 0.0) || !(fallback_fraction > 0.0))
        throw InvalidArgument("DE-Z noise and fallback fractions must be positive");
    if (history_draws < 0) throw InvalidArgument("history draw count must be non-negative");
}

void to_json(nlohmann::json& j, const CalibrationSettings& s) {
    j = nlohmann::json{{"posterior", s.posterior},
                       {"draws", s.mcmc.draws},
                       {"burn_in", s.mcmc.burn_in},
                       {"nsub", s.mcmc.nsub},
                       {"chains", s.mcmc.chains},
                       {"seed", s.mcmc.seed},
                       {"target_acceptance", s.mcmc.coarse.target_acceptance},
                       {"drop_fraction", s.mcmc.coarse.drop_fraction},
                       {"fine_target_acceptance", s.mcmc.fine_target_acceptance},
                       {"xi_seed", s.xi_seed},
                       {"aem_seed", s.aem_seed},
                       {"history_seed", s.history_seed},
                       {"init_lo", s.init_lo},
                       {"init_hi", s.init_hi},
                       {"init_points", s.init_points},
                       {"bound_probes", s.bound_probes},
                       {"bound_tolerance", s.bound_tolerance},
                       {"bound_rounds", s.bound_rounds},
                       {"noise_fraction", s.noise_fraction},
                       {"fallback_fraction", s.fallback_fraction},
                       {"history_draws", s.history_draws}};
}

void to_json(nlohmann::json& j, const CalibrationResult& r) {
    nlohmann::json chains = nlohmann::json::array();
    for (const auto& t : r.traces)
        chains.push_back({{"chain", t.chain},
                          {"seed", t.seed},
                          {"draws", t.size()},
                          {"acceptance", t.acceptance_rate(static_cast<std::size_t>(t.burn_in))},
                          {"final_scale", t.final_scale}});
    j = nlohmann::json{{"posterior", r.spec},
                       {"ln_sigma_init", r.init.ln_sigma},
                       {"ln_sigma_init_flat", r.init.flat},
                       {"bounds", {r.tuning.lo, r.tuning.hi}},
                       {"bound_rounds", r.tuning.rounds},
                       {"bounds_matched", r.tuning.matched},
                       {"bound_gap", r.tuning.max_relative_gap},
                       {"aem_clamp_fraction", r.tuning.aem ? r.tuning.aem->clamp_fraction : 0.0},
                       {"aem_diverged", r.tuning.aem ? r.tuning.aem->diverged : 0},
                       {"start", std::vector<double>(r.start.data(), r.start.data() + r.start.size())},
                       {"chains", chains},
                       {"burn_in", r.traces.empty() ? 0 : r.traces.front().burn_in},
                       {"fine_evaluations", r.fine_evaluations},
                       {"coarse_evaluations", r.coarse_evaluations},
                       {"seconds", r.seconds}};
}

Eigen::VectorXd prior_scale(const PosteriorSpec& spec, int dimension) {
    Eigen::VectorXd s(dimension);
    s.head(dimension - 1).setConstant(spec.prior_std());
    s(dimension - 1) = (spec.ln_sigma_hi - spec.ln_sigma_lo) / std::sqrt(12.0);
    return s;
}

std::vector<Eigen::VectorXd> prior_draws(const PosteriorSpec& spec, int count, std::uint64_t seed) {
    const auto m = spec.prior_mean.size();
    const double sd = spec.prior_std();
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> uni(spec.ln_sigma_lo, spec.ln_sigma_hi);
    std::vector<Eigen::VectorXd> out;
    for (int k = 0; k < count; ++k) {
        Rng rng = make_rng(seed, {0x707269ULL, static_cast<std::uint64_t>(k)});
        Eigen::VectorXd th(m + 1);
        for (Eigen::Index i = 0; i < m; ++i) th(i) = spec.prior_mean(i) + sd * n01(rng);
        th(m) = uni(rng);
        out.push_back(std::move(th));
    }
    return out;
}

std::vector<std::string> parameter_names(int free_count) {
    std::vector<std::string> names;
    for (int m = 0; m < free_count; ++m) names.push_back(fmt::format("C{}", m));
    names.emplace_back("ln_sigma_gp");
    return names;
}

CalibrationResult calibrate(const CalibrationProblem& problem, const KLEBasis& basis, const Eigen::VectorXd& c0,
                            const CalibrationSettings& settings, const ProgressSink& progress) {
    if (c0.size() != problem.free_count())
        throw InvalidArgument(fmt::format("C0 has {} entries, expected {}", c0.size(), problem.free_count()));
    PosteriorSpec spec = settings.posterior;
    spec.prior_mean = c0;
    CalibrationSettings checked = settings;
    checked.posterior = spec;
    checked.validate();
    auto say = [&](const std::string& msg) {
        if (progress) progress(msg);
    };
    const auto t0 = std::chrono::steady_clock::now();

    CalibrationResult out;
    Posterior post(problem, spec, basis, settings.xi_seed);
    out.init = init_sigma_gp(problem, c0, spec.gamma, post.half_modes(), post.xi_block(), settings.init_lo,
                             settings.init_hi, settings.init_points);
    say(fmt::format("ln sigma_gp init {:.4f}{}", out.init.ln_sigma, out.init.flat ? " (flat objective)" : ""));

    out.tuning = tune_bounds(post, settings.aem_seed, settings.bound_probes, settings.bound_tolerance,
                             settings.bound_rounds);
    say(fmt::format("ln sigma_gp bounds [{:.4f}, {:.4f}] after {} rounds, max gap {:.3g}{}", out.tuning.lo,
                    out.tuning.hi, out.tuning.rounds, out.tuning.max_relative_gap,
                    out.tuning.matched ? "" : " (not matched)"));
    if (out.tuning.aem && out.tuning.aem->over_dispersed())
        say(fmt::format("warning: AEM variance clamped at {:.0f}% of entries; the coarse model over-disperses",
                        100.0 * out.tuning.aem->clamp_fraction));
    out.spec = post.spec();
    out.spec.ln_sigma_lo = out.tuning.lo;
    out.spec.ln_sigma_hi = out.tuning.hi;

    const int dim = post.dimension();
    const double ls0 = std::clamp(out.init.ln_sigma, out.tuning.lo, out.tuning.hi);
    out.start = post.theta(c0, ls0);

    MLDAConfig mc = settings.mcmc;
    const Eigen::VectorXd scale = prior_scale(out.spec, dim);
    mc.coarse.noise = settings.noise_fraction * scale;
    mc.coarse.fallback = settings.fallback_fraction * scale;
    mc.coarse.burn_in = mc.burn_in;
    const int seeds = settings.history_draws > 0 ? settings.history_draws : 2 * dim;
    const auto history = prior_draws(out.spec, seeds, settings.history_seed);

    std::atomic<long> nf{0}, nc{0};
    Potential fine = [&](const Eigen::VectorXd& th) {
        ++nf;
        return post.fine(th);
    };
    Potential coarse = [&](const Eigen::VectorXd& th) {
        ++nc;
        return post.coarse(th);
    };
    auto run_chain = [&](int c) {
        Trace t = tlda_demz_run(fine, coarse, out.start, mc, c, history);
        say(fmt::format("chain {} done: acceptance {:.3f} after burn-in", c,
                        t.acceptance_rate(static_cast<std::size_t>(t.burn_in))));
        return t;
    };
    if (settings.parallel_chains && mc.chains > 1) {
        std::vector<std::future<Trace>> jobs;
        for (int c = 0; c < mc.chains; ++c) jobs.push_back(std::async(std::launch::async, run_chain, c));
        for (auto& j : jobs) out.traces.push_back(j.get());
    } else {
        for (int c = 0; c < mc.chains; ++c) out.traces.push_back(run_chain(c));
    }
    out.fine_evaluations = nf.load();
    out.coarse_evaluations = nc.load();
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace enor
