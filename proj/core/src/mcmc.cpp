#include "enor/mcmc.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "enor/error.hpp"
#include "enor/io.hpp"

namespace enor {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool metropolis_accept(double log_ratio, Rng& rng) {
    if (std::isnan(log_ratio) || log_ratio == -kInf) return false;
    if (log_ratio >= 0.0) return true;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    return std::log(u01(rng)) < log_ratio;
}

}  // namespace

void Trace::push(const Eigen::VectorXd& x, double log_post, bool acc, Level lvl) {
    draws.push_back(x);
    log_posterior.push_back(log_post);
    accepted.push_back(acc);
    level.push_back(lvl);
    auto_accepted.push_back(false);
    subchain_acceptance.push_back(0.0);
}

double Trace::acceptance_rate(std::size_t from) const {
    if (from >= accepted.size()) return 0.0;
    std::size_t n = 0;
    for (std::size_t i = from; i < accepted.size(); ++i) n += accepted[i] ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(accepted.size() - from);
}

Trace Trace::after_burn_in(std::size_t burn) const {
    if (burn > size()) throw InvalidArgument(fmt::format("burn-in {} exceeds the trace length {}", burn, size()));
    Trace t = *this;
    const auto b = static_cast<std::ptrdiff_t>(burn);
    t.draws.erase(t.draws.begin(), t.draws.begin() + b);
    t.log_posterior.erase(t.log_posterior.begin(), t.log_posterior.begin() + b);
    t.accepted.erase(t.accepted.begin(), t.accepted.begin() + b);
    t.level.erase(t.level.begin(), t.level.begin() + b);
    t.auto_accepted.erase(t.auto_accepted.begin(), t.auto_accepted.begin() + b);
    t.subchain_acceptance.erase(t.subchain_acceptance.begin(), t.subchain_acceptance.begin() + b);
    t.burn_in = 0;
    return t;
}

Eigen::MatrixXd Trace::matrix() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(size()), dimension());
    for (std::size_t i = 0; i < size(); ++i) m.row(static_cast<Eigen::Index>(i)) = draws[i].transpose();
    return m;
}

void Trace::validate() const {
    const std::size_t n = draws.size();
    if (log_posterior.size() != n || accepted.size() != n || level.size() != n || auto_accepted.size() != n ||
        subchain_acceptance.size() != n)
        throw InvalidArgument("trace: inconsistent bookkeeping lengths");
    for (std::size_t i = 0; i < n; ++i) {
        if (draws[i].size() != draws.front().size()) throw InvalidArgument("trace: draws of different dimension");
        if (!accepted[i] && i > 0 && draws[i] != draws[i - 1])
            throw InvalidArgument(fmt::format("trace: rejected draw {} differs from its predecessor", i));
        if (accepted[i] && !std::isfinite(log_posterior[i]))
            throw InvalidArgument(fmt::format("trace: accepted draw {} has a non-finite log posterior", i));
    }
}

void to_json(nlohmann::json& j, const Trace& t) {
    std::size_t autos = 0;
    for (bool a : t.auto_accepted) autos += a ? 1 : 0;
    j = nlohmann::json{{"chain", t.chain},
                       {"seed", t.seed},
                       {"draws", t.size()},
                       {"dimension", t.dimension()},
                       {"burn_in", t.burn_in},
                       {"acceptance_rate", t.acceptance_rate(static_cast<std::size_t>(t.burn_in))},
                       {"auto_accepted", autos},
                       {"gamma_de", t.gamma_de},
                       {"final_scale", t.final_scale}};
}

void write_trace_csv(const Trace& t, const std::string& path, const std::vector<std::string>& names) {
    if (static_cast<int>(names.size()) != t.dimension() && t.size() > 0)
        throw InvalidArgument("trace CSV: parameter name count differs from the dimension");
    std::vector<std::string> header = names;
    for (const char* extra : {"log_posterior", "accepted", "level", "auto_accepted", "subchain_acceptance"})
        header.emplace_back(extra);
    std::vector<std::vector<double>> rows;
    rows.reserve(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::vector<double> row(t.draws[i].data(), t.draws[i].data() + t.draws[i].size());
        row.push_back(t.log_posterior[i]);
        row.push_back(t.accepted[i] ? 1.0 : 0.0);
        row.push_back(t.level[i] == Level::Fine ? 1.0 : 0.0);
        row.push_back(t.auto_accepted[i] ? 1.0 : 0.0);
        row.push_back(t.subchain_acceptance[i]);
        rows.push_back(std::move(row));
    }
    write_table_csv(path, header, rows);
}

Trace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open trace {}", path));
    std::string line;
    if (!std::getline(in, line)) throw IoError(fmt::format("trace {} is empty", path));
    std::size_t cols = 1;
    for (char ch : line) cols += ch == ',' ? 1 : 0;
    if (cols < 6) throw IoError(fmt::format("trace {} has too few columns", path));
    const auto dim = static_cast<Eigen::Index>(cols - 5);
    Trace t;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
        if (v.size() != cols) throw IoError(fmt::format("trace {} line {}: expected {} values", path, lineno, cols));
        Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(v.data(), dim);
        t.push(x, v[static_cast<std::size_t>(dim)], v[static_cast<std::size_t>(dim) + 1] != 0.0,
               v[static_cast<std::size_t>(dim) + 2] != 0.0 ? Level::Fine : Level::Coarse);
        t.auto_accepted.back() = v[static_cast<std::size_t>(dim) + 3] != 0.0;
        t.subchain_acceptance.back() = v[static_cast<std::size_t>(dim) + 4];
    }
    return t;
}

Move mh_step(const Eigen::VectorXd& x, double potential_x, const Potential& target,
             const std::function<Eigen::VectorXd(const Eigen::VectorXd&, Rng&)>& propose, Rng& rng) {
    Eigen::VectorXd y = propose(x, rng);
    const double uy = target(y);
    if (std::isfinite(uy) && metropolis_accept(potential_x - uy, rng)) return {std::move(y), uy, true};
    return {x, potential_x, false};
}

Move mh_step(const Eigen::VectorXd& x, double potential_x, const Potential& target,
             const std::function<Eigen::VectorXd(const Eigen::VectorXd&, Rng&)>& propose,
             const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& log_q, Rng& rng) {
    Eigen::VectorXd y = propose(x, rng);
    const double uy = target(y);
    if (!std::isfinite(uy)) return {x, potential_x, false};
    const double log_ratio = potential_x - uy + log_q(x, y) - log_q(y, x);
    if (metropolis_accept(log_ratio, rng)) return {std::move(y), uy, true};
    return {x, potential_x, false};
}

double default_gamma_de(int dimension) {
    if (dimension < 1) throw InvalidArgument("dimension must be positive");
    return 2.38 / std::sqrt(2.0 * dimension);
}

Move demetropolis_z_step(const Eigen::VectorXd& x, double potential_x, const std::vector<Eigen::VectorXd>& history,
                         const Potential& target, double gamma, const Eigen::VectorXd& noise,
                         const Eigen::VectorXd& fallback, Rng& rng) {
    std::normal_distribution<double> n01;
    Eigen::VectorXd y = x;
    bool jumped = false;
    if (history.size() >= 2) {
        std::uniform_int_distribution<std::size_t> pick(0, history.size() - 1);
        const std::size_t a = pick(rng);
        std::size_t b = pick(rng);
        for (int tries = 0; b == a && tries < 64; ++tries) b = pick(rng);
        if (a != b && history[a] != history[b]) {
            y += gamma * (history[a] - history[b]);
            jumped = true;
        }
    }
    const Eigen::VectorXd& scale = jumped ? noise : fallback;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += scale(i) * n01(rng);
    const double uy = target(y);
    if (std::isfinite(uy) && metropolis_accept(potential_x - uy, rng)) return {std::move(y), uy, true};
    return {x, potential_x, false};
}

namespace {

void check_scales(const DEMZOptions& o, Eigen::Index dim) {
    if (o.noise.size() != dim || o.fallback.size() != dim)
        throw InvalidArgument("DEMetropolis-Z noise and fallback scales must match the dimension");
    if ((o.noise.array() < 0.0).any() || (o.fallback.array() <= 0.0).any())
        throw InvalidArgument("DEMetropolis-Z scales must be nonnegative (fallback positive)");
    if (!(o.drop_fraction >= 0.0 && o.drop_fraction < 1.0)) throw InvalidArgument("drop fraction must lie in [0, 1)");
}

// Robbins-Monro update of the log jump scale toward the target acceptance.
double adapt(double log_scale, double acceptance, double target, int step) {
    return log_scale + (acceptance - target) / std::sqrt(static_cast<double>(step) + 1.0);
}

void drop_history(std::vector<Eigen::VectorXd>& history, double fraction) {
    const auto drop = static_cast<std::ptrdiff_t>(fraction * static_cast<double>(history.size()));
    if (static_cast<std::size_t>(drop) + 2 <= history.size()) history.erase(history.begin(), history.begin() + drop);
}

}  // namespace

Trace run_demz(const Potential& target, const Eigen::VectorXd& x0, int steps, const DEMZOptions& options,
               std::uint64_t seed, std::vector<Eigen::VectorXd> history) {
    check_scales(options, x0.size());
    if (steps < 1) throw InvalidArgument("chain needs at least one step");
    const double gamma0 = options.gamma > 0.0 ? options.gamma : default_gamma_de(static_cast<int>(x0.size()));
    Rng rng = make_rng(seed, {0x64656d7aULL});
    Trace t;
    t.seed = seed;
    t.gamma_de = gamma0;
    t.burn_in = options.burn_in;
    double u = target(x0);
    if (!std::isfinite(u)) throw InvalidArgument("initial state has zero target density");
    Eigen::VectorXd x = x0;
    history.push_back(x);
    double log_scale = 0.0;
    for (int j = 0; j < steps; ++j) {
        const double s = std::exp(log_scale);
        Move m = demetropolis_z_step(x, u, history, target, gamma0 * s, options.noise, options.fallback * s, rng);
        x = std::move(m.x);
        u = m.potential;
        t.push(x, -u, m.accepted, Level::Fine);
        history.push_back(x);
        if (j < options.burn_in) {
            log_scale = adapt(log_scale, m.accepted ? 1.0 : 0.0, options.target_acceptance, j);
            if (j + 1 == options.burn_in) drop_history(history, options.drop_fraction);
        }
    }
    t.final_scale = std::exp(log_scale);
    return t;
}

Trace run_mh(const Potential& target, const Eigen::VectorXd& x0, int steps, const Eigen::VectorXd& scale,
             std::uint64_t seed) {
    if (scale.size() != x0.size()) throw InvalidArgument("proposal scale must match the dimension");
    Rng rng = make_rng(seed, {0x6d68ULL});
    Trace t;
    t.seed = seed;
    double u = target(x0);
    if (!std::isfinite(u)) throw InvalidArgument("initial state has zero target density");
    Eigen::VectorXd x = x0;
    auto propose = [&](const Eigen::VectorXd& v, Rng& r) {
        std::normal_distribution<double> n01;
        Eigen::VectorXd y = v;
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += scale(i) * n01(r);
        return y;
    };
    for (int j = 0; j < steps; ++j) {
        Move m = mh_step(x, u, target, propose, rng);
        x = std::move(m.x);
        u = m.potential;
        t.push(x, -u, m.accepted, Level::Fine);
    }
    return t;
}

void MLDAConfig::validate() const {
    if (nsub < 1) throw InvalidArgument("subchain length n_sub must be at least 1");
    if (draws < 1) throw InvalidArgument("number of draws must be positive");
    if (burn_in < 0 || burn_in >= draws) throw InvalidArgument("burn-in must satisfy 0 <= burn_in < draws");
    if (chains < 1) throw InvalidArgument("at least one chain is required");
    if (!(fine_target_acceptance >= 0.0 && fine_target_acceptance < 1.0))
        throw InvalidArgument("fine target acceptance must lie in [0, 1)");
}

Trace tlda_run(const Potential& fine, const Potential& coarse, const CoarseStep& step, const Eigen::VectorXd& x0,
               int draws, int nsub, Rng& rng, const TldaCallbacks& callbacks) {
    if (nsub < 1) throw InvalidArgument("subchain length n_sub must be at least 1");
    Trace t;
    Eigen::VectorXd x = x0;
    double uf = fine(x);
    double uc = coarse(x);
    if (!std::isfinite(uf) || !std::isfinite(uc)) throw InvalidArgument("initial state has zero target density");
    for (int j = 0; j < draws; ++j) {
        Eigen::VectorXd y = x;
        double uy = uc;
        int moved = 0;
        for (int k = 0; k < nsub; ++k) {
            Move m = step(y, uy, rng);
            if (m.accepted) {
                ++moved;
                y = std::move(m.x);
                uy = m.potential;
            }
        }
        const double frac = static_cast<double>(moved) / nsub;
        bool accepted = false;
        bool autos = false;
        if (moved == 0) {
            accepted = true;
            autos = true;
        } else {
            const double ufy = fine(y);
            if (std::isfinite(ufy) && metropolis_accept(-(ufy - uf) + (uy - uc), rng)) {
                accepted = true;
                x = std::move(y);
                uf = ufy;
                uc = uy;
            }
        }
        t.push(x, -uf, accepted, Level::Fine);
        t.auto_accepted.back() = autos;
        t.subchain_acceptance.back() = frac;
        if (callbacks.after_fine_step) callbacks.after_fine_step(j, x, accepted, frac);
    }
    return t;
}

Trace tlda_demz_run(const Potential& fine, const Potential& coarse, const Eigen::VectorXd& x0,
                    const MLDAConfig& config, int chain, std::vector<Eigen::VectorXd> history) {
    config.validate();
    const DEMZOptions& o = config.coarse;
    check_scales(o, x0.size());
    const double gamma0 = o.gamma > 0.0 ? o.gamma : default_gamma_de(static_cast<int>(x0.size()));
    const std::uint64_t seed = derive_seed(config.seed, {0x746c6461ULL, static_cast<std::uint64_t>(chain)});
    Rng rng(seed);
    history.push_back(x0);
    double log_scale = 0.0;
    CoarseStep step = [&](const Eigen::VectorXd& x, double u, Rng& r) {
        const double s = std::exp(log_scale);
        return demetropolis_z_step(x, u, history, coarse, gamma0 * s, o.noise, o.fallback * s, r);
    };
    TldaCallbacks cb;
    const bool on_fine = config.fine_target_acceptance > 0.0;
    // History pruned halfway through burn-in; the adaptation step size restarts there.
    const int prune_at = config.burn_in / 2;
    cb.after_fine_step = [&](int j, const Eigen::VectorXd& x, bool accepted, double frac) {
        history.push_back(x);
        if (j < config.burn_in) {
            const int k = j < prune_at ? j : j - prune_at;
            const double moved = accepted && frac > 0.0 ? 1.0 : 0.0;
            log_scale = on_fine ? adapt(log_scale, moved, config.fine_target_acceptance, k)
                                : adapt(log_scale, frac, o.target_acceptance, k);
            if (j + 1 == prune_at) drop_history(history, o.drop_fraction);
        }
    };
    Trace t = tlda_run(fine, coarse, step, x0, config.draws, config.nsub, rng, cb);
    t.chain = chain;
    t.seed = seed;
    t.gamma_de = gamma0;
    t.final_scale = std::exp(log_scale);
    t.burn_in = config.burn_in;
    return t;
}

}  // namespace enor
