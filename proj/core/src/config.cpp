#include "enor/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "enor/dispersion.hpp"
#include "enor/error.hpp"
#include "enor/io.hpp"
#include "enor/kernel.hpp"

namespace enor {

namespace {

std::string fmt_double(double v) { return fmt::format("{}", v); }

std::string fmt_list(const std::vector<double>& v) { return fmt::format("{}", fmt::join(v, ", ")); }

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::vector<std::string> parts;
    boost::split(parts, text, boost::is_any_of(", "), boost::token_compress_on);
    for (auto& p : parts) {
        boost::trim(p);
        if (!p.empty()) out.push_back(boost::lexical_cast<double>(p));
    }
    return out;
}

bool parse_bool(const std::string& text) {
    const std::string t = boost::to_lower_copy(boost::trim_copy(text));
    if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
    if (t == "false" || t == "no" || t == "off" || t == "0") return false;
    throw boost::bad_lexical_cast();
}

std::string target_name(TargetSource t) {
    switch (t) {
        case TargetSource::Auto: return "auto";
        case TargetSource::Bloch: return "bloch";
        case TargetSource::Packet: return "packet";
    }
    return "auto";
}

TargetSource target_from(const std::string& s) {
    const std::string t = boost::to_lower_copy(boost::trim_copy(s));
    if (t == "auto") return TargetSource::Auto;
    if (t == "bloch") return TargetSource::Bloch;
    if (t == "packet") return TargetSource::Packet;
    throw boost::bad_lexical_cast();
}

struct Entry {
    std::string section, key;
    std::function<void(const std::string&)> read;
    std::function<std::string()> write;
};

template <class T>
Entry num(const char* section, const char* key, T& field) {
    return {section, key, [&field](const std::string& s) { field = boost::lexical_cast<T>(boost::trim_copy(s)); },
            [&field] {
                if constexpr (std::is_floating_point_v<T>)
                    return fmt_double(field);
                else
                    return std::to_string(field);
            }};
}

Entry list(const char* section, const char* key, std::vector<double>& field) {
    return {section, key, [&field](const std::string& s) { field = parse_list(s); }, [&field] { return fmt_list(field); }};
}

Entry flag(const char* section, const char* key, bool& field) {
    return {section, key, [&field](const std::string& s) { field = parse_bool(s); },
            [&field] { return std::string(field ? "true" : "false"); }};
}

Entry path(const char* section, const char* key, std::filesystem::path& field) {
    return {section, key, [&field](const std::string& s) { field = boost::trim_copy(s); },
            [&field] { return field.string(); }};
}

/// l_gp values are stored as numbers; expressions are resolved after the bar length is known.
struct Deferred {
    std::string lgp, lgp_grid;
};

std::vector<Entry> entries(ExperimentConfig& c, Deferred& d) {
    auto& p = c.calibration.posterior;
    auto& m = c.calibration.mcmc;
    auto& cs = c.calibration;
    return {
        num("material", "length", c.material.length),
        num("material", "layer", c.material.layer),
        num("material", "disorder", c.material.disorder),
        num("material", "modulus1", c.material.materials.modulus1),
        num("material", "modulus2", c.material.materials.modulus2),
        num("material", "density", c.material.materials.density),
        num("material", "seed", c.material.seed),
        num("grid", "dx", c.dx),
        num("grid", "dt", c.dt),
        num("grid", "horizon", c.horizon),
        num("grid", "degree", c.degree),
        num("grid", "final_time", c.final_time),
        num("data", "dns_min_steps", c.dns_min_steps),
        num("data", "seed", c.data_seed),
        path("data", "dir", c.data_dir),
        list("data", "setting1", c.setting1),
        list("data", "setting2", c.setting2),
        list("data", "setting3", c.setting3),
        {"data", "targets", [&c](const std::string& s) { c.targets = target_from(s); },
         [&c] { return target_name(c.targets); }},
        num("fit", "lambda", c.fit.lambda),
        num("fit", "max_iterations", c.fit.max_iterations),
        num("fit", "gradient_tolerance", c.fit.gradient_tolerance),
        num("fit", "function_tolerance", c.fit.function_tolerance),
        flag("fit", "adjoint", c.fit.adjoint),
        num("posterior", "epsilon", p.epsilon),
        num("posterior", "gamma", p.gamma),
        num("posterior", "sigma_hat", p.sigma_hat),
        num("posterior", "ln_sigma_lo", p.ln_sigma_lo),
        num("posterior", "ln_sigma_hi", p.ln_sigma_hi),
        num("posterior", "K", p.ensemble_size),
        num("posterior", "N0", p.aem_draws),
        {"posterior", "l_gp", [&d](const std::string& s) { d.lgp = boost::trim_copy(s); },
         [&p] { return fmt_double(p.lgp); }},
        {"posterior", "l_gp_grid", [&d](const std::string& s) { d.lgp_grid = boost::trim_copy(s); },
         [&c] { return fmt_list(c.lgp_grid); }},
        num("posterior", "init_lo", cs.init_lo),
        num("posterior", "init_hi", cs.init_hi),
        num("posterior", "init_points", cs.init_points),
        num("posterior", "bound_probes", cs.bound_probes),
        num("posterior", "bound_tolerance", cs.bound_tolerance),
        num("posterior", "bound_rounds", cs.bound_rounds),
        num("mcmc", "chains", m.chains),
        num("mcmc", "draws", m.draws),
        num("mcmc", "burn_in", m.burn_in),
        num("mcmc", "nsub", m.nsub),
        num("mcmc", "target_acceptance", m.coarse.target_acceptance),
        num("mcmc", "drop_fraction", m.coarse.drop_fraction),
        num("mcmc", "fine_target_acceptance", m.fine_target_acceptance),
        num("mcmc", "noise_fraction", cs.noise_fraction),
        num("mcmc", "fallback_fraction", cs.fallback_fraction),
        num("mcmc", "history_draws", cs.history_draws),
        flag("mcmc", "parallel", cs.parallel_chains),
        num("seeds", "xi", cs.xi_seed),
        num("seeds", "aem", cs.aem_seed),
        num("seeds", "mcmc", m.seed),
        num("seeds", "history", cs.history_seed),
        num("seeds", "predict", c.predict_seed),
        num("predict", "param_samples", c.predict_param_samples),
        num("predict", "gp_per_param", c.predict_gp_per_param),
        path("output", "dir", c.output_dir),
    };
}

}  // namespace

std::vector<LoadingScenario> ExperimentConfig::scenarios() const {
    std::vector<LoadingScenario> out;
    for (double k : setting1) out.push_back(LoadingScenario::oscillating_source(k, material.layer, material.length));
    for (double w : setting2) out.push_back(LoadingScenario::plane_wave_ramp(w, material.length));
    for (double w : setting3) out.push_back(LoadingScenario::wave_packet(w, material.length));
    return out;
}

DnsOptions ExperimentConfig::dns_options() const {
    DnsOptions o;
    o.final_time = final_time;
    o.dx = dx;
    o.dt = dt;
    o.min_steps_per_layer = dns_min_steps;
    return o;
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    for (int k = 1; k <= 20; ++k) c.setting1.push_back(k);
    for (int i = 1; i <= 11; ++i) c.setting2.push_back(0.35 * i);
    c.calibration.posterior.lgp = c.material.length / 2.0;
    c.calibration.mcmc.chains = 6;
    c.calibration.mcmc.draws = 4000;
    c.calibration.mcmc.burn_in = 300;
    c.calibration.mcmc.nsub = 100;
    const double len = c.material.length;
    c.lgp_grid = {2 * len, len, len / 2, len / 4, len / 8, len / 16, len / 32, len / 64, len / 128};
    return c;
}

double parse_length_expression(const std::string& token, double length) {
    const std::string t = boost::trim_copy(token);
    double value = 0.0;
    try {
        const auto pos = t.find('L');
        if (pos == std::string::npos) {
            value = boost::lexical_cast<double>(t);
        } else {
            const std::string head = boost::trim_copy(t.substr(0, pos));
            const std::string tail = boost::trim_copy(t.substr(pos + 1));
            double factor =
                head.empty() ? 1.0 : boost::lexical_cast<double>(boost::trim_right_copy_if(head, boost::is_any_of("*")));
            if (!tail.empty()) {
                if (tail.front() != '/') throw boost::bad_lexical_cast();
                factor /= boost::lexical_cast<double>(boost::trim_copy(tail.substr(1)));
            }
            value = factor * length;
        }
    } catch (const boost::bad_lexical_cast&) {
        throw InvalidArgument(fmt::format("cannot parse length expression '{}'", t));
    }
    if (!std::isfinite(value)) throw InvalidArgument(fmt::format("length expression '{}' is not finite", t));
    return value;
}

ExperimentConfig parse_config(const std::string& text, std::vector<std::string>& errors) {
    ExperimentConfig c = default_config();
    Deferred d;
    boost::property_tree::ptree tree;
    try {
        std::istringstream in(text);
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        errors.push_back(fmt::format("malformed INI at line {}: {}", e.line(), e.message()));
        return c;
    }
    auto table = entries(c, d);
    std::map<std::string, std::map<std::string, Entry*>> index;
    for (auto& e : table) index[e.section][e.key] = &e;
    for (const auto& [section, body] : tree) {
        auto sec = index.find(section);
        if (sec == index.end()) {
            errors.push_back(fmt::format("unknown section [{}]", section));
            continue;
        }
        for (const auto& [key, value] : body) {
            auto it = sec->second.find(key);
            if (it == sec->second.end()) {
                errors.push_back(fmt::format("unknown key '{}' in [{}]", key, section));
                continue;
            }
            try {
                it->second->read(value.data());
            } catch (const std::exception&) {
                errors.push_back(fmt::format("[{}] {}: cannot parse '{}'", section, key, value.data()));
            }
        }
    }
    const double len = c.material.length;
    try {
        if (!d.lgp.empty()) c.calibration.posterior.lgp = parse_length_expression(d.lgp, len);
        else if (tree.get_child_optional("material.length"))
            c.calibration.posterior.lgp = len / 2.0;
    } catch (const std::exception&) {
        errors.push_back(fmt::format("[posterior] l_gp: cannot parse '{}'", d.lgp));
    }
    if (!d.lgp_grid.empty()) {
        c.lgp_grid.clear();
        std::vector<std::string> parts;
        boost::split(parts, d.lgp_grid, boost::is_any_of(","));
        for (const auto& p : parts) {
            try {
                c.lgp_grid.push_back(parse_length_expression(p, len));
            } catch (const std::exception&) {
                errors.push_back(fmt::format("[posterior] l_gp_grid: cannot parse '{}'", boost::trim_copy(p)));
            }
        }
    } else if (tree.get_child_optional("material.length")) {
        c.lgp_grid = {2 * len, len, len / 2, len / 4, len / 8, len / 16, len / 32, len / 64, len / 128};
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    if (!std::filesystem::exists(file)) throw InvalidArgument(fmt::format("config file {} does not exist", file.string()));
    std::vector<std::string> errors;
    ExperimentConfig c = parse_config(read_text(file), errors);
    if (!errors.empty())
        throw InvalidArgument(fmt::format("{}: {}", file.string(), fmt::join(errors, "; ")));
    return c;
}

std::string to_ini(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    Deferred d;
    std::string out, current;
    for (const auto& e : entries(c, d)) {
        if (e.section != current) {
            out += fmt::format("{}[{}]\n", current.empty() ? "" : "\n", e.section);
            current = e.section;
        }
        out += fmt::format("{} = {}\n", e.key, e.write());
    }
    return out;
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
    std::vector<std::string> v;
    const auto& mat = c.material;
    if (!(mat.length > 0.0)) v.push_back("material.length must be positive");
    if (!(mat.layer > 0.0)) v.push_back("material.layer must be positive");
    if (mat.length > 0.0 && mat.layer > 0.0 && mat.layer >= mat.length)
        v.push_back("material.layer must be smaller than material.length");
    if (!(mat.disorder >= 0.0 && mat.disorder < 1.0)) v.push_back("material.disorder must lie in [0, 1)");
    if (!(mat.materials.modulus1 > 0.0) || !(mat.materials.modulus2 > 0.0))
        v.push_back("material moduli must be positive");
    if (!(mat.materials.density > 0.0)) v.push_back("material.density must be positive");

    const bool grid_ok = c.dx > 0.0 && c.dt > 0.0 && c.horizon > 0.0;
    if (!(c.dx > 0.0)) v.push_back("grid.dx must be positive");
    if (!(c.dt > 0.0)) v.push_back("grid.dt must be positive");
    if (!(c.horizon > 0.0)) v.push_back("grid.horizon must be positive");
    if (grid_ok && std::floor(c.horizon / c.dx + 1e-9) < 1.0) v.push_back("grid.horizon must span at least one dx");
    if (c.degree < 2) v.push_back("grid.degree must be at least 2");
    if (!(c.final_time > 0.0)) v.push_back("grid.final_time must be positive");
    if (grid_ok && c.final_time > 0.0 && std::abs(c.final_time / c.dt - std::round(c.final_time / c.dt)) > 1e-9)
        v.push_back("grid.final_time must be a multiple of grid.dt");
    if (grid_ok && mat.length > 0.0) {
        const double cells = mat.length / c.dx;
        if (std::abs(cells - std::round(cells)) > 1e-9) v.push_back("material.length must be a multiple of grid.dx");
        if (2.0 * c.horizon >= mat.length) v.push_back("grid.horizon leaves no interior points (2 horizon >= length)");
    }
    if (c.dns_min_steps < 1) v.push_back("data.dns_min_steps must be at least 1");

    if (c.setting1.empty() && c.setting2.empty() && c.setting3.empty())
        v.push_back("no loading scenarios selected (data.setting1/2/3 all empty)");
    for (double k : c.setting1)
        if (!(k > 0.0)) v.push_back(fmt::format("data.setting1 wavenumber index {} must be positive", k));
    for (double w : c.setting2)
        if (!(w > 0.0)) v.push_back(fmt::format("data.setting2 frequency {} must be positive", w));
    for (double w : c.setting3)
        if (!(w > 0.0)) v.push_back(fmt::format("data.setting3 frequency {} must be positive", w));
    if (!c.data_dir.empty() && !std::filesystem::exists(c.data_dir / "manifest.json"))
        v.push_back(fmt::format("data.dir {} does not contain a dataset", c.data_dir.string()));

    // The leapfrog update is stable iff dt^2 max_k omega^2(k) <= 4; checked on the minimum-norm
    // constraint-satisfying kernel of the bilayer cell.
    if (grid_ok && c.degree >= 2 && mat.layer > 0.0 && mat.materials.modulus1 > 0.0 && mat.materials.modulus2 > 0.0 &&
        mat.materials.density > 0.0 && std::floor(c.horizon / c.dx + 1e-9) >= 1.0) {
        try {
            const PhysicsTargets tg = bloch_targets(bilayer_cell(mat.layer, mat.materials));
            const Eigen::VectorXd free = minimum_norm_free(tg, c.degree, c.horizon, c.dx);
            const KernelCoeffs k = eliminate_constraints(free, tg, c.degree, c.horizon, c.dx);
            double w2 = 0.0;
            const double kmax = M_PI / c.dx;
            for (int j = 0; j <= 512; ++j) w2 = std::max(w2, dispersion_omega_squared(k, kmax * j / 512.0));
            const double number = c.dt * c.dt * w2;
            if (number > 4.0)
                v.push_back(fmt::format("grid.dt = {} violates the stability bound: dt^2 max omega^2 = {:.3f} > 4", c.dt,
                                        number));
        } catch (const std::exception& e) {
            v.push_back(fmt::format("stability bound could not be evaluated: {}", e.what()));
        }
    }

    const auto& p = c.calibration.posterior;
    if (!(p.epsilon > 0.0)) v.push_back("posterior.epsilon must be positive");
    if (!(p.gamma >= 0.0)) v.push_back("posterior.gamma must be non-negative");
    if (!(p.sigma_hat >= 0.0)) v.push_back("posterior.sigma_hat must be non-negative (0 selects 0.1 max|C0|)");
    if (!(p.ln_sigma_lo < p.ln_sigma_hi)) v.push_back("posterior.ln_sigma_lo must be below ln_sigma_hi");
    if (p.ensemble_size < 2) v.push_back("posterior.K must be at least 2");
    if (p.aem_draws < 2) v.push_back("posterior.N0 must be at least 2");
    if (!(p.lgp > 0.0)) v.push_back("posterior.l_gp must be positive");
    if (c.lgp_grid.empty()) v.push_back("posterior.l_gp_grid must not be empty");
    for (double l : c.lgp_grid)
        if (!(l > 0.0)) v.push_back(fmt::format("posterior.l_gp_grid value {} must be positive", l));
    const auto& cs = c.calibration;
    if (!(cs.init_lo < cs.init_hi)) v.push_back("posterior.init_lo must be below init_hi");
    if (cs.init_points < 3) v.push_back("posterior.init_points must be at least 3");
    if (cs.bound_probes < 2) v.push_back("posterior.bound_probes must be at least 2");
    if (!(cs.bound_tolerance > 0.0)) v.push_back("posterior.bound_tolerance must be positive");
    if (cs.bound_rounds < 1) v.push_back("posterior.bound_rounds must be at least 1");

    const auto& m = cs.mcmc;
    if (m.chains < 1) v.push_back("mcmc.chains must be at least 1");
    if (m.draws < 1) v.push_back("mcmc.draws must be positive");
    if (m.burn_in < 0 || m.burn_in >= m.draws) v.push_back("mcmc.burn_in must satisfy 0 <= burn_in < draws");
    if (m.nsub < 1) v.push_back("mcmc.nsub must be at least 1");
    if (!(m.coarse.target_acceptance > 0.0 && m.coarse.target_acceptance < 1.0))
        v.push_back("mcmc.target_acceptance must lie in (0, 1)");
    if (!(m.coarse.drop_fraction >= 0.0 && m.coarse.drop_fraction < 1.0))
        v.push_back("mcmc.drop_fraction must lie in [0, 1)");
    if (!(m.fine_target_acceptance >= 0.0 && m.fine_target_acceptance < 1.0))
        v.push_back("mcmc.fine_target_acceptance must lie in [0, 1) (0 adapts on the coarse level)");
    if (!(cs.noise_fraction > 0.0)) v.push_back("mcmc.noise_fraction must be positive");
    if (!(cs.fallback_fraction > 0.0)) v.push_back("mcmc.fallback_fraction must be positive");
    if (cs.history_draws < 0) v.push_back("mcmc.history_draws must be non-negative");

    if (c.predict_param_samples < 1) v.push_back("predict.param_samples must be at least 1");
    if (c.predict_gp_per_param < 1) v.push_back("predict.gp_per_param must be at least 1");
    if (c.output_dir.empty()) v.push_back("output.dir must not be empty");
    return v;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    ExperimentConfig copy = c;
    Deferred d;
    j = nlohmann::json::object();
    for (const auto& e : entries(copy, d)) j[e.section][e.key] = e.write();
}

}  // namespace enor
