#include "enor/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <unsupported/Eigen/FFT>

#include "enor/dispersion.hpp"
#include "enor/error.hpp"
#include "enor/io.hpp"
#include "enor/rng.hpp"

namespace enor {

namespace {

// Split every chain into halves of equal length (a middle draw of odd chains is dropped).
std::vector<std::vector<double>> split_chains(const std::vector<std::vector<double>>& chains) {
    if (chains.empty()) throw InvalidArgument("R-hat needs at least one chain");
    const std::size_t n = chains.front().size();
    for (const auto& c : chains)
        if (c.size() != n) throw InvalidArgument("R-hat needs chains of equal length");
    if (n < 4) throw InvalidArgument("R-hat needs chains of at least four draws");
    const std::size_t h = n / 2;
    std::vector<std::vector<double>> out;
    for (const auto& c : chains) {
        out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
        out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(h), c.end());
    }
    return out;
}

// Normal scores of fractional pooled ranks (ties share their average rank).
std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& chains) {
    std::vector<std::pair<double, std::size_t>> pooled;
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (std::size_t i = 0; i < chains[c].size(); ++i) pooled.emplace_back(chains[c][i], c * chains[c].size() + i);
    std::sort(pooled.begin(), pooled.end());
    const double total = static_cast<double>(pooled.size());
    std::vector<double> ranks(pooled.size());
    for (std::size_t a = 0; a < pooled.size();) {
        std::size_t b = a;
        while (b + 1 < pooled.size() && pooled[b + 1].first == pooled[a].first) ++b;
        const double r = 0.5 * static_cast<double>(a + b) + 1.0;
        for (std::size_t k = a; k <= b; ++k) ranks[pooled[k].second] = r;
        a = b + 1;
    }
    const boost::math::normal n01;
    std::vector<std::vector<double>> out = chains;
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (std::size_t i = 0; i < chains[c].size(); ++i)
            out[c][i] = boost::math::quantile(n01, (ranks[c * chains[c].size() + i] - 0.375) / (total + 0.25));
    return out;
}

Statistic classic_rhat(const std::vector<std::vector<double>>& chains) {
    const double m = static_cast<double>(chains.size());
    const double n = static_cast<double>(chains.front().size());
    std::vector<double> means, vars;
    for (const auto& c : chains) {
        const double mu = std::accumulate(c.begin(), c.end(), 0.0) / n;
        double v = 0.0;
        for (double x : c) v += (x - mu) * (x - mu);
        means.push_back(mu);
        vars.push_back(v / (n - 1.0));
    }
    const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b = m > 1.0 ? b * n / (m - 1.0) : 0.0;
    if (!(w > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), false};
    const double var_plus = (n - 1.0) / n * w + b / n;
    return {std::sqrt(var_plus / w), true};
}

bool constant(const std::vector<std::vector<double>>& chains) {
    const double first = chains.front().front();
    for (const auto& c : chains)
        for (double x : c)
            if (x != first) return false;
    return true;
}

double median_of(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// Biased autocovariance (normalized by n) at lags 0..n-1.
std::vector<double> autocovariance(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::size_t nfft = 1;
    while (nfft < 2 * n) nfft <<= 1;
    const double mu = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    std::vector<double> padded(nfft, 0.0);
    for (std::size_t i = 0; i < n; ++i) padded[i] = x[i] - mu;
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> freq;
    fft.fwd(freq, padded);
    for (auto& z : freq) z = std::complex<double>(std::norm(z), 0.0);
    std::vector<double> back;
    fft.inv(back, freq);
    std::vector<double> acov(n);
    for (std::size_t i = 0; i < n; ++i) acov[i] = back[i] / static_cast<double>(n);
    return acov;
}

}  // namespace

Statistic rhat(const std::vector<std::vector<double>>& chains) {
    const auto split = split_chains(chains);
    if (constant(split)) return {std::numeric_limits<double>::quiet_NaN(), false};
    return classic_rhat(rank_normalize(split));
}

Statistic rhat_folded(const std::vector<std::vector<double>>& chains) {
    auto split = split_chains(chains);
    std::vector<double> pooled;
    for (const auto& c : split) pooled.insert(pooled.end(), c.begin(), c.end());
    const double med = median_of(pooled);
    for (auto& c : split)
        for (double& x : c) x = std::abs(x - med);
    if (constant(split)) return {std::numeric_limits<double>::quiet_NaN(), false};
    return classic_rhat(rank_normalize(split));
}

Statistic ess(const std::vector<std::vector<double>>& chains) {
    if (chains.empty()) throw InvalidArgument("ESS needs at least one chain");
    std::size_t n = chains.front().size();
    for (const auto& c : chains) n = std::min(n, c.size());
    if (n < 10) throw InvalidArgument("ESS needs at least ten draws per chain");
    std::vector<std::vector<double>> cs;
    for (const auto& c : chains) cs.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n));
    if (constant(cs)) return {std::numeric_limits<double>::quiet_NaN(), false};

    const double m = static_cast<double>(cs.size());
    const double nd = static_cast<double>(n);
    std::vector<std::vector<double>> acov;
    std::vector<double> means;
    double mean_var = 0.0;
    for (const auto& c : cs) {
        acov.push_back(autocovariance(c));
        means.push_back(std::accumulate(c.begin(), c.end(), 0.0) / nd);
        mean_var += acov.back()[0] * nd / (nd - 1.0);
    }
    mean_var /= m;
    double var_plus = mean_var * (nd - 1.0) / nd;
    if (cs.size() > 1) {
        const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
        double b = 0.0;
        for (double mu : means) b += (mu - grand) * (mu - grand);
        var_plus += b / (m - 1.0);
    }
    if (!(var_plus > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), false};
    auto mean_acov = [&](std::size_t t) {
        double s = 0.0;
        for (const auto& a : acov) s += a[t];
        return s / m;
    };
    std::vector<double> rho(n, 0.0);
    rho[0] = 1.0;
    double rho_even = 1.0;
    double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
    rho[1] = rho_odd;
    std::size_t s = 1;
    while (s + 4 < n && rho_even + rho_odd > 0.0) {
        rho_even = 1.0 - (mean_var - mean_acov(s + 1)) / var_plus;
        rho_odd = 1.0 - (mean_var - mean_acov(s + 2)) / var_plus;
        if (rho_even + rho_odd >= 0.0) {
            rho[s + 1] = rho_even;
            rho[s + 2] = rho_odd;
        }
        s += 2;
    }
    const std::size_t max_s = s;
    if (rho_even > 0.0 && max_s + 1 < n) rho[max_s + 1] = rho_even;
    for (std::size_t t = 1; t + 3 <= max_s; t += 2) {
        if (rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]) {
            rho[t + 1] = 0.5 * (rho[t - 1] + rho[t]);
            rho[t + 2] = rho[t + 1];
        }
    }
    const double total = m * nd;
    double tau = -1.0 + 2.0 * std::accumulate(rho.begin(), rho.begin() + static_cast<std::ptrdiff_t>(max_s), 0.0) +
                 (max_s + 1 < n ? rho[max_s + 1] : 0.0);
    tau = std::max(tau, 1.0 / std::log10(total));
    return {total / tau, true};
}

std::vector<std::vector<double>> parameter_chains(const std::vector<Trace>& traces, int index) {
    std::vector<std::vector<double>> out;
    for (const auto& t : traces) {
        if (index < 0 || index >= t.dimension()) throw InvalidArgument("parameter index out of range");
        std::vector<double> c;
        c.reserve(t.size());
        for (const auto& d : t.draws) c.push_back(d(index));
        out.push_back(std::move(c));
    }
    return out;
}

ConvergenceReport convergence_report(const std::vector<Trace>& traces) {
    if (traces.empty()) throw InvalidArgument("no traces to diagnose");
    ConvergenceReport r;
    const int dim = traces.front().dimension();
    r.min_ess = std::numeric_limits<double>::infinity();
    std::size_t shortest = traces.front().size();
    for (const auto& t : traces) shortest = std::min(shortest, t.size());
    const Statistic undefined{std::numeric_limits<double>::quiet_NaN(), false};
    for (int p = 0; p < dim; ++p) {
        const auto chains = parameter_chains(traces, p);
        r.rhat.push_back(shortest >= 4 ? rhat(chains) : undefined);
        r.rhat_folded.push_back(shortest >= 4 ? rhat_folded(chains) : undefined);
        r.ess.push_back(shortest >= 10 ? ess(chains) : undefined);
        if (r.rhat.back().defined) r.max_rhat = std::max(r.max_rhat, r.rhat.back().value);
        if (r.ess.back().defined) r.min_ess = std::min(r.min_ess, r.ess.back().value);
    }
    for (const auto& t : traces) {
        r.total_draws += t.size();
        r.acceptance.push_back(t.acceptance_rate());
    }
    return r;
}

void to_json(nlohmann::json& j, const ConvergenceReport& r) {
    auto values = [](const std::vector<Statistic>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& s : v) a.push_back(s.defined ? nlohmann::json(s.value) : nlohmann::json(nullptr));
        return a;
    };
    j = nlohmann::json{{"rhat", values(r.rhat)},
                       {"rhat_folded", values(r.rhat_folded)},
                       {"ess", values(r.ess)},
                       {"max_rhat", r.max_rhat},
                       {"min_ess", r.min_ess},
                       {"total_draws", r.total_draws},
                       {"acceptance", r.acceptance}};
}

double crps(std::vector<double> samples, double truth) {
    if (samples.size() < 2) throw InvalidArgument("CRPS needs at least two samples");
    std::sort(samples.begin(), samples.end());
    const double k = static_cast<double>(samples.size());
    double abs_err = 0.0, pair = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        abs_err += std::abs(samples[i] - truth);
        pair += (2.0 * static_cast<double>(i + 1) - k - 1.0) * samples[i];
    }
    // sum over ordered pairs |X_a - X_b| = 2 sum_i (2i - K - 1) x_(i)
    return abs_err / k - pair / (k * k);
}

double crps_pwm(std::vector<double> samples, double truth) {
    if (samples.size() < 2) throw InvalidArgument("CRPS needs at least two samples");
    std::sort(samples.begin(), samples.end());
    const double k = static_cast<double>(samples.size());
    double abs_err = 0.0, mean = 0.0, weighted = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        abs_err += std::abs(samples[i] - truth);
        mean += samples[i];
        weighted += samples[i] * (static_cast<double>(i) + 0.5) / k;
    }
    return abs_err / k + mean / k - 2.0 * weighted / k;
}

std::string to_string(PushForwardMode mode) {
    switch (mode) {
        case PushForwardMode::Full: return "full";
        case PushForwardMode::GpOnly: return "gp_only";
        case PushForwardMode::ParamOnly: return "param_only";
    }
    return "full";
}

PushForwardMode push_forward_mode_from_string(const std::string& name) {
    if (name == "full") return PushForwardMode::Full;
    if (name == "gp_only") return PushForwardMode::GpOnly;
    if (name == "param_only") return PushForwardMode::ParamOnly;
    throw InvalidArgument(fmt::format("unknown push-forward mode '{}' (full, gp_only, param_only)", name));
}

std::vector<Eigen::VectorXd> thin_draws(const std::vector<Trace>& traces, int count) {
    std::vector<const Eigen::VectorXd*> pooled;
    for (const auto& t : traces)
        for (const auto& d : t.draws) pooled.push_back(&d);
    if (pooled.empty()) throw InvalidArgument("no posterior draws to thin");
    if (count < 1) throw InvalidArgument("thinning needs a positive sample count");
    std::vector<Eigen::VectorXd> out;
    const double stride = static_cast<double>(pooled.size()) / count;
    for (int k = 0; k < count; ++k) {
        const auto idx = std::min(pooled.size() - 1, static_cast<std::size_t>((k + 0.5) * stride));
        out.push_back(*pooled[idx]);
    }
    return out;
}

double quantile(std::vector<double> v, double p) {
    if (v.empty()) throw InvalidArgument("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile level must lie in [0, 1]");
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double a = v[lo];
    if (hi == lo) return a;
    const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(hi), v.end());
    return a + (h - static_cast<double>(lo)) * (b - a);
}

Band summarize(const std::vector<Eigen::MatrixXd>& frame_samples) {
    const auto rows = static_cast<Eigen::Index>(frame_samples.size());
    const Eigen::Index pts = rows ? frame_samples.front().cols() : 0;
    Band b;
    b.mean = b.sd = b.lo68 = b.hi68 = b.lo95 = b.hi95 = Field::Zero(rows, pts);
    std::vector<double> col;
    for (Eigen::Index f = 0; f < rows; ++f) {
        const Eigen::MatrixXd& m = frame_samples[static_cast<std::size_t>(f)];
        if (m.rows() == 0) continue;
        for (Eigen::Index i = 0; i < pts; ++i) {
            col.assign(m.col(i).data(), m.col(i).data() + m.rows());
            const double mu = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
            double var = 0.0;
            for (double x : col) var += (x - mu) * (x - mu);
            b.mean(f, i) = mu;
            b.sd(f, i) = col.size() > 1 ? std::sqrt(var / static_cast<double>(col.size() - 1)) : 0.0;
            std::sort(col.begin(), col.end());
            b.lo95(f, i) = quantile(col, 0.025);
            b.lo68(f, i) = quantile(col, 0.16);
            b.hi68(f, i) = quantile(col, 0.84);
            b.hi95(f, i) = quantile(col, 0.975);
        }
    }
    return b;
}

PushForwardSummary push_forward(const CalibrationProblem& problem, const KLEBasis& basis,
                                const std::vector<Eigen::VectorXd>& draws, PushForwardMode mode,
                                const PushForwardOptions& options) {
    if (draws.empty()) throw InvalidArgument("push-forward needs at least one parameter draw");
    if (options.gp_per_param < 1) throw InvalidArgument("push-forward needs at least one realization per draw");
    const int dim = problem.free_count() + 1;
    for (const auto& d : draws)
        if (d.size() != dim) throw InvalidArgument("parameter draw has the wrong dimension");

    PushForwardSummary pf;
    pf.mode = mode;
    pf.frames = options.frames.empty() ? std::vector<Eigen::Index>{problem.frames() - 1} : options.frames;
    for (Eigen::Index f : pf.frames)
        if (f < 0 || f >= problem.frames()) throw InvalidArgument(fmt::format("frame {} outside the data", f));

    const Eigen::MatrixXd modes = half_grid_modes(basis, problem.grid());
    std::vector<Eigen::VectorXd> thetas = draws;
    if (mode == PushForwardMode::GpOnly) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
        for (const auto& d : draws) mean += d;
        thetas.assign(draws.size(), mean / static_cast<double>(draws.size()));
    }
    const std::size_t ns = problem.scenario_count();
    const Eigen::Index pts = problem.grid().points();
    const auto capacity = static_cast<Eigen::Index>(thetas.size()) * options.gp_per_param;
    pf.samples.assign(ns, std::vector<Eigen::MatrixXd>(pf.frames.size(), Eigen::MatrixXd(capacity, pts)));
    Eigen::Index row = 0;
    std::normal_distribution<double> n01;
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        const Eigen::VectorXd& th = thetas[j];
        NonlocalOperator op(problem.grid(), problem.stencil(th.head(dim - 1)));
        const double sigma = std::exp(th(dim - 1));
        const bool deterministic = mode == PushForwardMode::ParamOnly;
        const int runs = deterministic ? 1 : options.gp_per_param;
        for (int g = 0; g < runs; ++g) {
            Eigen::VectorXd xi = Eigen::VectorXd::Zero(basis.terms());
            if (!deterministic && !options.zero_xi) {
                Rng rng = make_rng(options.seed, {0x7066ULL, j, static_cast<std::uint64_t>(g)});
                for (Eigen::Index r = 0; r < xi.size(); ++r) xi(r) = n01(rng);
            }
            op.set_correction(sample_field(modes, sigma, xi));
            std::vector<Field> out(ns);
            try {
                for (std::size_t s = 0; s < ns; ++s) out[s] = problem.rollout(op, s);
            } catch (const SolverDivergence&) {
                pf.diverged += deterministic ? options.gp_per_param : 1;
                continue;
            }
            const int copies = deterministic ? options.gp_per_param : 1;
            for (int c = 0; c < copies; ++c) {
                for (std::size_t s = 0; s < ns; ++s)
                    for (std::size_t f = 0; f < pf.frames.size(); ++f)
                        pf.samples[s][f].row(row) = out[s].row(pf.frames[f]);
                ++row;
            }
        }
    }
    pf.realizations = static_cast<int>(row);
    for (auto& per_s : pf.samples)
        for (auto& m : per_s) m.conservativeResize(row, pts);
    for (std::size_t s = 0; s < ns; ++s) pf.bands.push_back(summarize(pf.samples[s]));
    return pf;
}

double average_crps(const PushForwardSummary& pf, const CalibrationProblem& problem, std::size_t s, std::size_t f) {
    const SolverGrid& g = problem.grid();
    const Eigen::MatrixXd& m = pf.samples.at(s).at(f);
    const Eigen::Index frame = pf.frames.at(f);
    double sum = 0.0;
    std::vector<double> col;
    for (Eigen::Index i = g.interior_begin(); i < g.interior_end(); ++i) {
        col.assign(m.col(i).data(), m.col(i).data() + m.rows());
        sum += crps(col, problem.data(s)(frame, i));
    }
    return sum / static_cast<double>(g.interior_size());
}

double band_coverage(const PushForwardSummary& pf, const CalibrationProblem& problem, std::size_t s, std::size_t f) {
    const SolverGrid& g = problem.grid();
    const Band& b = pf.bands.at(s);
    const Eigen::Index frame = pf.frames.at(f);
    const auto row = static_cast<Eigen::Index>(f);
    std::size_t inside = 0;
    for (Eigen::Index i = g.interior_begin(); i < g.interior_end(); ++i) {
        const double y = problem.data(s)(frame, i);
        if (y >= b.lo95(row, i) && y <= b.hi95(row, i)) ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(g.interior_size());
}

void write_band_csv(const std::string& path, const std::vector<double>& x, const Band& band, Eigen::Index row) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        rows.push_back({x[i], band.mean(row, c), band.lo68(row, c), band.hi68(row, c), band.lo95(row, c),
                        band.hi95(row, c)});
    }
    write_table_csv(path, {"x", "mean", "lo68", "hi68", "lo95", "hi95"}, rows);
}

DispersionBand group_velocity_band(const CalibrationProblem& problem, const std::vector<Eigen::VectorXd>& draws,
                                   double k_max, int samples) {
    if (samples < 2 || !(k_max > 0.0)) throw InvalidArgument("group velocity band needs k_max > 0 and two samples");
    DispersionBand band;
    std::vector<std::vector<double>> vg(static_cast<std::size_t>(samples));
    for (const auto& d : draws) {
        const KernelCoeffs k = problem.kernel(d.head(problem.free_count()));
        for (int j = 0; j < samples; ++j) {
            const double kk = k_max * (j + 1) / samples;
            vg[static_cast<std::size_t>(j)].push_back(group_velocity(k, kk).vg);
        }
    }
    for (int j = 0; j < samples; ++j) {
        band.k.push_back(k_max * (j + 1) / samples);
        band.lo95.push_back(quantile(vg[static_cast<std::size_t>(j)], 0.025));
        band.median.push_back(quantile(vg[static_cast<std::size_t>(j)], 0.5));
        band.hi95.push_back(quantile(vg[static_cast<std::size_t>(j)], 0.975));
    }
    return band;
}

}  // namespace enor
