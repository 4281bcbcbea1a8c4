// enor: command line front end of the embedded nonlocal operator regression library.

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "enor/calibrate.hpp"
#include "enor/config.hpp"
#include "enor/dataset.hpp"
#include "enor/diagnostics.hpp"
#include "enor/dispersion.hpp"
#include "enor/error.hpp"
#include "enor/io.hpp"
#include "enor/kle.hpp"
#include "enor/pipeline.hpp"

namespace {

using namespace enor;

constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kInternalError = 2;

struct Common {
    std::string config;
    bool quiet = false;

    ExperimentConfig load() const {
        ExperimentConfig c = config.empty() ? default_config() : load_config(config);
        return c;
    }
    void say(const std::string& msg) const {
        if (!quiet) std::cerr << msg << '\n';
    }
};

void require_valid(const ExperimentConfig& c) {
    const auto v = validate_config(c);
    if (!v.empty()) throw InvalidArgument(fmt::format("invalid configuration:\n  {}", fmt::join(v, "\n  ")));
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
    return given.empty() ? fallback : fs::path(given);
}

int generate_data(const Common& common, const std::string& out, const std::string& format) {
    const ExperimentConfig c = common.load();
    require_valid(c);
    const fs::path dir = or_default(out, c.output_dir / "data" / "dataset");
    common.say(fmt::format("generating {} scenarios up to t = {}", c.scenarios().size(), c.final_time));
    const WaveDataset data = make_dataset(c);
    save_dataset(data, dir, format == "csv" ? FieldFormat::Csv : FieldFormat::Binary);
    common.say(fmt::format("wrote {} ({} frames x {} points, hash {})", dir.string(), data.frames(), data.points(),
                           data.content_hash().substr(0, 12)));
    return kOk;
}

WaveDataset dataset_for(const ExperimentConfig& c, const std::string& data) {
    const fs::path dir = or_default(data, c.data_dir.empty() ? c.output_dir / "data" / "dataset" : c.data_dir);
    if (!fs::exists(dir / "manifest.json"))
        throw InvalidArgument(fmt::format("no dataset at {}; run generate-data first or pass --data", dir.string()));
    return load_dataset(dir);
}

int fit_nor_verb(const Common& common, const std::string& data, const std::string& out) {
    const ExperimentConfig c = common.load();
    require_valid(c);
    const WaveDataset d = dataset_for(c, data);
    FitArtifact a;
    a.targets = make_targets(c);
    common.say(fmt::format("targets c0 = {:.10g}, R = {:.6g}", a.targets.c0, a.targets.R));
    const CalibrationProblem problem = make_problem(c, d, a.targets);
    a.fit = fit_nor(problem, c.fit);
    const fs::path file = or_default(out, c.output_dir / "fit" / "fit.json");
    fs::create_directories(file.parent_path());
    save_fit(file, a);
    const auto res = constraint_residuals(a.fit.kernel);
    common.say(fmt::format("loss {:.6g} after {} iterations ({}), constraint residuals {:.2e} {:.2e}", a.fit.loss,
                           a.fit.iterations, a.fit.message, res(0), res(1)));
    return kOk;
}

int calibrate_verb(const Common& common, const std::string& data, const std::string& fit, std::optional<double> lgp,
                   const std::string& out) {
    ExperimentConfig c = common.load();
    if (lgp) c.calibration.posterior.lgp = *lgp;
    require_valid(c);
    const WaveDataset d = dataset_for(c, data);
    const FitArtifact a = load_fit(or_default(fit, c.output_dir / "fit" / "fit.json"));
    const CalibrationProblem problem = make_problem(c, d, a.targets);
    const KLEBasis basis = build_basis(c.calibration.posterior.lgp, d.length());
    common.say(fmt::format("l_gp = {}: {} KLE terms", c.calibration.posterior.lgp, basis.terms()));
    const CalibrationResult r =
        calibrate(problem, basis, a.fit.free, c.calibration, [&](const std::string& m) { common.say(m); });
    const fs::path dir = or_default(out, c.output_dir / "calibrate");
    save_calibration(dir, r);
    std::vector<Trace> post;
    for (const auto& t : r.traces) post.push_back(t.after_burn_in(static_cast<std::size_t>(t.burn_in)));
    if (post.front().size() >= 10) {
        const ConvergenceReport rep = convergence_report(post);
        write_json(dir / "report.json", nlohmann::json(rep));
        common.say(fmt::format("max R-hat {:.4f}, min ESS {:.1f}", rep.max_rhat, rep.min_ess));
    }
    common.say(fmt::format("wrote {} in {:.1f} s", dir.string(), r.seconds));
    return kOk;
}

std::vector<Eigen::Index> parse_frames(const std::string& text, Eigen::Index frames) {
    if (text.empty() || text == "last") return {frames - 1};
    if (text == "all") {
        std::vector<Eigen::Index> all;
        for (Eigen::Index n = 0; n < frames; ++n) all.push_back(n);
        return all;
    }
    std::vector<Eigen::Index> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stol(tok));
        } catch (const std::exception&) {
            throw InvalidArgument(fmt::format("frame '{}' is not an integer", tok));
        }
    }
    return out;
}

int predict_verb(const Common& common, const std::string& data, const std::string& fit, const std::string& cal_dir,
                 const std::string& mode, const std::string& frames, bool no_samples, const std::string& out) {
    const ExperimentConfig c = common.load();
    require_valid(c);
    const WaveDataset d = dataset_for(c, data);
    const FitArtifact a = load_fit(or_default(fit, c.output_dir / "fit" / "fit.json"));
    const CalibrationProblem problem = make_problem(c, d, a.targets);
    const CalibrationArtifact cal = load_calibration(or_default(cal_dir, c.output_dir / "calibrate"));
    const KLEBasis basis = build_basis(cal.spec.lgp, d.length());
    std::vector<Trace> post;
    for (const auto& t : cal.traces) post.push_back(t.after_burn_in(static_cast<std::size_t>(t.burn_in)));
    PushForwardOptions po;
    po.param_samples = c.predict_param_samples;
    po.gp_per_param = c.predict_gp_per_param;
    po.seed = c.predict_seed;
    po.frames = parse_frames(frames, d.frames());
    const auto pf = push_forward(problem, basis, thin_draws(post, po.param_samples),
                                 push_forward_mode_from_string(mode), po);
    const fs::path dir = or_default(out, c.output_dir / "predict");
    write_prediction(dir, pf, problem, !no_samples);
    common.say(fmt::format("{} realizations ({} diverged) written to {}", pf.realizations, pf.diverged, dir.string()));
    return kOk;
}

int dispersion_verb(const Common& common, const std::string& fit, const std::string& cal_dir, double k_max,
                    int samples, const std::string& out) {
    const ExperimentConfig c = common.load();
    const FitArtifact a = load_fit(or_default(fit, c.output_dir / "fit" / "fit.json"));
    if (!(k_max > 0.0) || samples < 2) throw InvalidArgument("dispersion needs --k-max > 0 and --samples >= 2");
    std::vector<std::vector<double>> rows;
    const auto curve = dispersion_curve(a.fit.kernel, k_max, samples);
    std::vector<std::string> header{"k", "omega", "vg", "unstable"};
    std::optional<DispersionBand> band;
    if (!cal_dir.empty()) {
        const WaveDataset d = dataset_for(c, "");
        const CalibrationProblem problem = make_problem(c, d, a.targets);
        const CalibrationArtifact cal = load_calibration(cal_dir);
        std::vector<Trace> post;
        for (const auto& t : cal.traces) post.push_back(t.after_burn_in(static_cast<std::size_t>(t.burn_in)));
        band = group_velocity_band(problem, thin_draws(post, c.predict_param_samples), k_max, samples);
        header.insert(header.end(), {"vg_lo95", "vg_median", "vg_hi95"});
    }
    for (std::size_t j = 0; j < curve.size(); ++j) {
        std::vector<double> row{curve[j].k, curve[j].omega, curve[j].vg, curve[j].unstable ? 1.0 : 0.0};
        if (band) {
            // the band grid starts at k_max / samples; match rows by wavenumber
            double lo = std::nan(""), med = std::nan(""), hi = std::nan("");
            for (std::size_t b = 0; b < band->k.size(); ++b)
                if (std::abs(band->k[b] - curve[j].k) < 1e-12 * k_max) {
                    lo = band->lo95[b];
                    med = band->median[b];
                    hi = band->hi95[b];
                }
            row.insert(row.end(), {lo, med, hi});
        }
        rows.push_back(row);
    }
    const fs::path file = or_default(out, c.output_dir / "dispersion.csv");
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    write_table_csv(file, header, rows);
    if (const auto bs = band_stop_frequency(curve)) common.say(fmt::format("band stop near omega = {:.4f}", *bs));
    common.say(fmt::format("wrote {}", file.string()));
    return kOk;
}

int score_verb(const Common& common, const std::string& pred, const std::string& truth, const std::string& out) {
    const ExperimentConfig c = common.load();
    if (pred.empty() || truth.empty()) throw InvalidArgument("score needs --pred and --truth");
    const WaveDataset d = load_dataset(truth);
    const PushForwardSummary pf = read_prediction_samples(pred);
    if (pf.samples.size() != d.scenario_count())
        throw InvalidArgument(fmt::format("prediction has {} scenarios, truth has {}", pf.samples.size(),
                                          d.scenario_count()));
    const SolverGrid grid = SolverGrid::make(d.length(), d.dx, d.dt, c.horizon);
    std::vector<std::vector<double>> rows;
    std::vector<double> x;
    for (std::size_t s = 0; s < pf.samples.size(); ++s) {
        for (std::size_t f = 0; f < pf.frames.size(); ++f) {
            const Eigen::MatrixXd& m = pf.samples[s][f];
            if (m.cols() != d.points()) throw InvalidArgument("prediction and truth grids differ");
            double sum = 0.0;
            for (Eigen::Index i = grid.interior_begin(); i < grid.interior_end(); ++i) {
                x.assign(m.col(i).data(), m.col(i).data() + m.rows());
                const double v = crps(x, d.u[s](pf.frames[f], i));
                sum += v;
                rows.push_back({static_cast<double>(s), static_cast<double>(pf.frames[f]), d.x[static_cast<std::size_t>(i)], v});
            }
            common.say(fmt::format("scenario {} ({}) t = {:g}: average CRPS {:.6g}", s, d.scenarios[s].label(),
                                   d.dt * static_cast<double>(pf.frames[f]),
                                   sum / static_cast<double>(grid.interior_size())));
        }
    }
    const fs::path file = or_default(out, c.output_dir / "crps.csv");
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    write_table_csv(file, {"scenario", "frame", "x", "crps"}, rows);
    return kOk;
}

int diagnose_verb(const Common& common, const std::string& trace_dir, std::optional<int> burn_in,
                  const std::string& out) {
    const ExperimentConfig c = common.load();
    const CalibrationArtifact cal = load_calibration(or_default(trace_dir, c.output_dir / "calibrate"));
    std::vector<Trace> post;
    for (const auto& t : cal.traces)
        post.push_back(t.after_burn_in(static_cast<std::size_t>(burn_in.value_or(t.burn_in))));
    const ConvergenceReport rep = convergence_report(post);
    const fs::path file = or_default(out, fs::path(trace_dir.empty() ? (c.output_dir / "calibrate").string() : trace_dir) /
                                              "report.json");
    write_json(file, nlohmann::json(rep));
    const auto names = parameter_names(post.front().dimension() - 1);
    for (std::size_t p = 0; p < names.size(); ++p)
        common.say(fmt::format("{:>12}  R-hat {:>8}  ESS {:>8}", names[p],
                               rep.rhat[p].defined ? fmt::format("{:.4f}", rep.rhat[p].value) : "n/a",
                               rep.ess[p].defined ? fmt::format("{:.0f}", rep.ess[p].value) : "n/a"));
    common.say(fmt::format("max R-hat {:.4f}, min ESS {:.1f}, acceptance {}", rep.max_rhat, rep.min_ess,
                           fmt::join(rep.acceptance, " ")));
    return kOk;
}

int pipeline_verb(const Common& common, bool sweep, bool force, bool check) {
    const ExperimentConfig c = common.load();
    if (check) {
        const auto v = validate_config(c);
        for (const auto& s : v) std::cout << s << '\n';
        if (!v.empty()) return kUserError;
        std::cout << "ok\n";
        return kOk;
    }
    PipelineOptions o;
    o.sweep = sweep;
    o.force = force;
    o.progress = [&](const std::string& m) { common.say(m); };
    const RunManifest m = run_pipeline(c, o);
    int hits = 0;
    for (const auto& s : m.stages) hits += s.cache_hit ? 1 : 0;
    common.say(fmt::format("{} stages ({} cached); manifest at {}", m.stages.size(), hits,
                           (c.output_dir / "manifest.json").string()));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Embedded nonlocal operator regression: data generation, kernel fit, Bayesian calibration and "
                 "prediction for wave propagation in layered bars"};
    app.require_subcommand(1);
    app.set_version_flag("--version", enor::version());
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "INI experiment configuration")->check(CLI::ExistingFile);
        sub->add_flag("-q,--quiet", common.quiet, "Suppress progress messages");
    };
    std::function<int()> action;

    std::string out, data, fit, cal, mode = "full", frames, format = "binary", pred, truth, trace;
    std::optional<double> lgp;
    std::optional<int> burn;
    bool no_samples = false, sweep = false, force = false, check = false;
    double k_max = 6.0;
    int samples = 60;

    auto* gen = app.add_subcommand("generate-data", "Run the DNS for every configured loading scenario");
    add_common(gen);
    gen->add_option("--out", out, "Dataset directory");
    gen->add_option("--format", format, "Field format")->check(CLI::IsMember({"binary", "csv"}));
    gen->callback([&] { action = [&] { return generate_data(common, out, format); }; });

    auto* fitc = app.add_subcommand("fit-nor", "Deterministic kernel fit (C0)");
    add_common(fitc);
    fitc->add_option("--data", data, "Dataset directory");
    fitc->add_option("--out", out, "Fit record (JSON)");
    fitc->callback([&] { action = [&] { return fit_nor_verb(common, data, out); }; });

    auto* calc = app.add_subcommand("calibrate", "sigma_gp initialization, AEM, bound tuning and TLDA sampling");
    add_common(calc);
    calc->add_option("--data", data, "Dataset directory");
    calc->add_option("--fit", fit, "Fit record from fit-nor");
    calc->add_option("--lgp", lgp, "GP correlation length (overrides the config)");
    calc->add_option("--out", out, "Calibration directory");
    calc->callback([&] { action = [&] { return calibrate_verb(common, data, fit, lgp, out); }; });

    auto* predc = app.add_subcommand("predict", "Push-forward prediction bands from a calibration");
    add_common(predc);
    predc->add_option("--data", data, "Dataset directory");
    predc->add_option("--fit", fit, "Fit record");
    predc->add_option("--calibration", cal, "Calibration directory");
    predc->add_option("--mode", mode, "Uncertainty sources")->check(CLI::IsMember({"full", "gp_only", "param_only"}));
    predc->add_option("--frames", frames, "Frames to keep: last, all or a comma list");
    predc->add_flag("--no-samples", no_samples, "Write bands only");
    predc->add_option("--out", out, "Prediction directory");
    predc->callback([&] { action = [&] { return predict_verb(common, data, fit, cal, mode, frames, no_samples, out); }; });

    auto* disp = app.add_subcommand("dispersion", "Dispersion and group velocity of the fitted kernel");
    add_common(disp);
    disp->add_option("--fit", fit, "Fit record");
    disp->add_option("--calibration", cal, "Calibration directory for a posterior group-velocity band");
    disp->add_option("--k-max", k_max, "Largest wavenumber");
    disp->add_option("--samples", samples, "Number of wavenumbers");
    disp->add_option("--out", out, "CSV output");
    disp->callback([&] { action = [&] { return dispersion_verb(common, fit, cal, k_max, samples, out); }; });

    auto* sc = app.add_subcommand("score", "Pointwise CRPS of predicted samples against a dataset");
    add_common(sc);
    sc->add_option("--pred", pred, "Prediction directory written with samples")->required();
    sc->add_option("--truth", truth, "Dataset directory")->required();
    sc->add_option("--out", out, "CSV output");
    sc->callback([&] { action = [&] { return score_verb(common, pred, truth, out); }; });

    auto* diag = app.add_subcommand("diagnose", "R-hat and ESS of calibration traces");
    add_common(diag);
    diag->add_option("--trace", trace, "Calibration directory with chain_<c>.csv");
    diag->add_option("--burn-in", burn, "Draws discarded per chain (default: recorded burn-in)");
    diag->add_option("--out", out, "Report (JSON)");
    diag->callback([&] { action = [&] { return diagnose_verb(common, trace, burn, out); }; });

    auto* pipe = app.add_subcommand("pipeline", "All stages with content-hash caching");
    add_common(pipe);
    pipe->add_flag("--sweep", sweep, "Calibrate every l_gp of the grid");
    pipe->add_flag("--force", force, "Recompute cached stages");
    pipe->add_flag("--check", check, "Validate the configuration and exit");
    pipe->callback([&] { action = [&] { return pipeline_verb(common, sweep, force, check); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUserError;
    }
    try {
        return action();
    } catch (const enor::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUserError;
    } catch (const enor::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUserError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
}
