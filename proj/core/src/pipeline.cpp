#include "enor/pipeline.hpp"

#include <chrono>
#include <fstream>

#include <fmt/format.h>

#include "enor/dispersion.hpp"
#include "enor/error.hpp"
#include "enor/io.hpp"
#include "enor/kle.hpp"

#ifndef ENOR_VERSION_STRING
#define ENOR_VERSION_STRING "0.0.0"
#endif

namespace enor {

std::string version() { return ENOR_VERSION_STRING; }

const StageRecord* RunManifest::find(const std::string& name) const {
    for (const auto& s : stages)
        if (s.name == name) return &s;
    return nullptr;
}

void to_json(nlohmann::json& j, const StageRecord& r) {
    j = nlohmann::json{{"name", r.name},
                       {"key", r.key},
                       {"cache_hit", r.cache_hit},
                       {"seconds", r.seconds},
                       {"outputs", r.outputs}};
}

void to_json(nlohmann::json& j, const RunManifest& m) {
    j = nlohmann::json{{"version", m.version}, {"config", m.config}, {"stages", m.stages}};
}

WaveDataset make_dataset(const ExperimentConfig& config) {
    if (!config.data_dir.empty()) return load_dataset(config.data_dir);
    return generate_dataset(config.material, config.scenarios(), config.dns_options(), config.data_seed);
}

PhysicsTargets make_targets(const ExperimentConfig& config) {
    const bool bloch = config.targets == TargetSource::Bloch ||
                       (config.targets == TargetSource::Auto && config.periodic());
    if (bloch) return bloch_targets(bilayer_cell(config.material.layer, config.material.materials));
    // Packet speeds need a bar much longer than the packet travel distance.
    MaterialSpec long_bar = config.material;
    long_bar.length = 300.0;
    return dns_packet_targets(long_bar.build());
}

CalibrationProblem make_problem(const ExperimentConfig& config, const WaveDataset& data, const PhysicsTargets& targets) {
    return CalibrationProblem(data, config.degree, config.horizon, targets);
}

void save_fit(const fs::path& file, const FitArtifact& a) {
    nlohmann::json j = a.fit;
    j["targets"] = {{"density", a.targets.density}, {"c0", a.targets.c0}, {"R", a.targets.R}};
    j["free"] = std::vector<double>(a.fit.free.data(), a.fit.free.data() + a.fit.free.size());
    j["kernel"] = a.fit.kernel;
    write_json(file, j);
}

FitArtifact load_fit(const fs::path& file) {
    const nlohmann::json j = read_json(file);
    FitArtifact a;
    try {
        a.targets.density = j.at("targets").at("density").get<double>();
        a.targets.c0 = j.at("targets").at("c0").get<double>();
        a.targets.R = j.at("targets").at("R").get<double>();
        const auto free = j.at("free").get<std::vector<double>>();
        a.fit.free = Eigen::Map<const Eigen::VectorXd>(free.data(), static_cast<Eigen::Index>(free.size()));
        a.fit.kernel = j.at("kernel").get<KernelCoeffs>();
        a.fit.loss = j.value("loss", 0.0);
        a.fit.iterations = j.value("iterations", 0);
        a.fit.converged = j.value("converged", false);
        a.fit.message = j.value("message", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw IoError(fmt::format("{}: malformed fit record ({})", file.string(), e.what()));
    }
    return a;
}

void save_calibration(const fs::path& dir, const CalibrationResult& r) {
    fs::create_directories(dir);
    write_json(dir / "calibration.json", nlohmann::json(r));
    const auto names = parameter_names(static_cast<int>(r.spec.prior_mean.size()));
    for (const auto& t : r.traces) write_trace_csv(t, (dir / fmt::format("chain_{}.csv", t.chain)).string(), names);
}

CalibrationArtifact load_calibration(const fs::path& dir) {
    CalibrationArtifact a;
    a.summary = read_json(dir / "calibration.json");
    try {
        a.spec = a.summary.at("posterior").get<PosteriorSpec>();
        for (const auto& c : a.summary.at("chains")) {
            const int chain = c.at("chain").get<int>();
            Trace t = read_trace_csv((dir / fmt::format("chain_{}.csv", chain)).string());
            t.chain = chain;
            t.seed = c.at("seed").get<std::uint64_t>();
            t.final_scale = c.value("final_scale", 1.0);
            t.burn_in = a.summary.value("burn_in", 0);
            a.traces.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(fmt::format("{}: malformed calibration record ({})", dir.string(), e.what()));
    }
    return a;
}

ScoreTable score(const PushForwardSummary& pf, const CalibrationProblem& problem) {
    ScoreTable t;
    t.frames = pf.frames;
    t.crps.resize(static_cast<Eigen::Index>(problem.scenario_count()), static_cast<Eigen::Index>(pf.frames.size()));
    for (std::size_t s = 0; s < problem.scenario_count(); ++s) {
        t.scenarios.push_back(problem.dataset().scenarios[s].label());
        for (std::size_t f = 0; f < pf.frames.size(); ++f)
            t.crps(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(f)) = average_crps(pf, problem, s, f);
    }
    return t;
}

void write_score_csv(const fs::path& file, const ScoreTable& t, double dt) {
    std::string out = "scenario";
    for (auto f : t.frames) out += fmt::format(",crps_t{:g}", dt * static_cast<double>(f));
    out += "\n";
    for (Eigen::Index s = 0; s < t.crps.rows(); ++s) {
        out += t.scenarios[static_cast<std::size_t>(s)];
        for (Eigen::Index f = 0; f < t.crps.cols(); ++f) out += fmt::format(",{:.17g}", t.crps(s, f));
        out += "\n";
    }
    write_text(file, out);
}

std::vector<std::string> write_prediction(const fs::path& dir, const PushForwardSummary& pf,
                                          const CalibrationProblem& problem, bool samples) {
    fs::create_directories(dir);
    std::vector<std::string> files;
    const auto& x = problem.grid().x;
    nlohmann::json summary = {{"mode", to_string(pf.mode)},
                              {"realizations", pf.realizations},
                              {"diverged", pf.diverged},
                              {"frames", pf.frames}};
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t s = 0; s < pf.bands.size(); ++s) {
        for (std::size_t f = 0; f < pf.frames.size(); ++f) {
            const std::string name = fmt::format("band_s{}_n{}.csv", s, pf.frames[f]);
            write_band_csv((dir / name).string(), x, pf.bands[s], static_cast<Eigen::Index>(f));
            files.push_back(name);
            if (samples) {
                const std::string raw = fmt::format("samples_s{}_n{}.bin", s, pf.frames[f]);
                write_field_binary(dir / raw, pf.samples[s][f]);
                files.push_back(raw);
            }
            per.push_back({{"scenario", s},
                           {"label", problem.dataset().scenarios[s].label()},
                           {"frame", pf.frames[f]},
                           {"coverage95", band_coverage(pf, problem, s, f)},
                           {"crps", average_crps(pf, problem, s, f)}});
        }
    }
    summary["scenarios"] = per;
    summary["samples"] = samples;
    summary["scenario_count"] = pf.bands.size();
    summary["points"] = problem.grid().points();
    write_json(dir / "prediction.json", summary);
    files.push_back("prediction.json");
    return files;
}

PushForwardSummary read_prediction_samples(const fs::path& dir) {
    const nlohmann::json j = read_json(dir / "prediction.json");
    PushForwardSummary pf;
    try {
        if (!j.at("samples").get<bool>())
            throw IoError(fmt::format("{} holds bands only; rerun predict with samples", dir.string()));
        pf.mode = push_forward_mode_from_string(j.at("mode").get<std::string>());
        pf.frames = j.at("frames").get<std::vector<Eigen::Index>>();
        pf.realizations = j.at("realizations").get<int>();
        pf.diverged = j.at("diverged").get<int>();
        const auto ns = j.at("scenario_count").get<std::size_t>();
        const auto pts = j.at("points").get<Eigen::Index>();
        pf.samples.resize(ns);
        for (std::size_t s = 0; s < ns; ++s)
            for (auto n : pf.frames)
                pf.samples[s].push_back(
                    read_field_binary(dir / fmt::format("samples_s{}_n{}.bin", s, n), pf.realizations, pts));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(fmt::format("{}: malformed prediction record ({})", dir.string(), e.what()));
    }
    for (const auto& per : pf.samples) pf.bands.push_back(summarize(per));
    return pf;
}

namespace {

std::string stage_key(const std::string& name, const nlohmann::json& inputs) {
    const nlohmann::json j = {{"stage", name}, {"version", version()}, {"inputs", inputs}};
    return sha256_hex(j.dump());
}

/// Cached when stage.json carries the same key and every listed output exists.
bool cached(const fs::path& dir, const std::string& key, std::vector<std::string>& outputs) {
    const fs::path marker = dir / "stage.json";
    if (!fs::exists(marker)) return false;
    nlohmann::json j;
    try {
        j = read_json(marker);
    } catch (const Error&) {
        return false;
    }
    if (j.value("key", std::string{}) != key) return false;
    outputs = j.value("outputs", std::vector<std::string>{});
    for (const auto& o : outputs)
        if (!fs::exists(dir / o)) return false;
    return true;
}

void mark(const fs::path& dir, const std::string& key, const std::vector<std::string>& outputs) {
    write_json(dir / "stage.json", {{"key", key}, {"outputs", outputs}});
}

class Runner {
public:
    Runner(const ExperimentConfig& c, const PipelineOptions& o) : config_(c), options_(o) {
        manifest_.version = version();
        manifest_.config = c;
    }

    template <class Body>
    StageRecord& stage(const std::string& name, const nlohmann::json& inputs, Body&& body) {
        const fs::path dir = config_.output_dir / name;
        StageRecord rec;
        rec.name = name;
        rec.key = stage_key(name, inputs);
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::string> outputs;
        if (!options_.force && cached(dir, rec.key, outputs)) {
            rec.cache_hit = true;
            say(fmt::format("[{}] cached", name));
        } else {
            say(fmt::format("[{}] running", name));
            fs::create_directories(dir);
            fs::remove(dir / "stage.json");
            outputs = body(dir);
            mark(dir, rec.key, outputs);
        }
        for (const auto& o : outputs) rec.outputs.push_back((fs::path(name) / o).string());
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        manifest_.stages.push_back(rec);
        write_manifest();
        return manifest_.stages.back();
    }

    void say(const std::string& msg) const {
        if (options_.progress) options_.progress(msg);
    }

    void write_manifest() const {
        fs::create_directories(config_.output_dir);
        write_json(config_.output_dir / "manifest.json", nlohmann::json(manifest_));
    }

    RunManifest manifest_;

private:
    const ExperimentConfig& config_;
    const PipelineOptions& options_;
};

std::string lgp_tag(double lgp) { return fmt::format("lgp{:.6g}", lgp); }

}  // namespace

RunManifest run_pipeline(const ExperimentConfig& config, const PipelineOptions& options) {
    const auto violations = validate_config(config);
    if (!violations.empty())
        throw InvalidArgument(fmt::format("invalid configuration: {}", fmt::join(violations, "; ")));
    Runner run(config, options);

    // data
    nlohmann::json data_inputs;
    if (!config.data_dir.empty()) {
        data_inputs = {{"external", load_dataset(config.data_dir).content_hash()}};
    } else {
        nlohmann::json cfg = config;
        data_inputs = {{"material", cfg["material"]}, {"grid", cfg["grid"]}, {"data", cfg["data"]}};
        data_inputs["grid"].erase("degree");
        data_inputs["grid"].erase("horizon");
        data_inputs["data"].erase("targets");
    }
    const auto& data_stage = run.stage("data", data_inputs, [&](const fs::path& dir) {
        save_dataset(make_dataset(config), dir / "dataset");
        return std::vector<std::string>{"dataset/manifest.json"};
    });
    const std::string data_key = data_stage.key;
    const WaveDataset data = load_dataset(config.output_dir / "data" / "dataset");

    // fit
    const nlohmann::json cfg = config;
    const nlohmann::json fit_inputs = {{"data", data_key},
                                       {"degree", config.degree},
                                       {"horizon", config.horizon},
                                       {"targets", cfg["data"]["targets"]},
                                       {"material", cfg["material"]},
                                       {"fit", cfg["fit"]}};
    const std::string fit_key = run.stage("fit", fit_inputs, [&](const fs::path& dir) {
        FitArtifact a;
        a.targets = make_targets(config);
        const CalibrationProblem problem = make_problem(config, data, a.targets);
        a.fit = fit_nor(problem, config.fit);
        run.say(fmt::format("[fit] loss {:.6g} after {} iterations", a.fit.loss, a.fit.iterations));
        save_fit(dir / "fit.json", a);
        return std::vector<std::string>{"fit.json"};
    }).key;
    const FitArtifact fit = load_fit(config.output_dir / "fit" / "fit.json");
    const CalibrationProblem problem = make_problem(config, data, fit.targets);

    std::vector<double> lgps = options.sweep ? config.lgp_grid : std::vector<double>{config.calibration.posterior.lgp};
    nlohmann::json sweep = nlohmann::json::array();
    for (double lgp : lgps) {
        const std::string tag = lgp_tag(lgp);
        const std::string kle_key = run.stage("kle-" + tag, {{"lgp", lgp}, {"length", data.length()}, {"energy", 0.9}},
                                              [&](const fs::path& dir) {
                                                  write_json(dir / "basis.json", build_basis(lgp, data.length()));
                                                  return std::vector<std::string>{"basis.json"};
                                              })
                                        .key;
        const KLEBasis basis = read_json(config.output_dir / ("kle-" + tag) / "basis.json").get<KLEBasis>();

        CalibrationSettings settings = config.calibration;
        settings.posterior.lgp = lgp;
        const std::string cal_name = "calibrate-" + tag;
        const std::string cal_key = run.stage(cal_name, {{"fit", fit_key}, {"kle", kle_key}, {"settings", settings}},
                                              [&](const fs::path& dir) {
                                                  const auto r = calibrate(problem, basis, fit.fit.free, settings,
                                                                           options.progress);
                                                  save_calibration(dir, r);
                                                  std::vector<std::string> out{"calibration.json"};
                                                  for (const auto& t : r.traces)
                                                      out.push_back(fmt::format("chain_{}.csv", t.chain));
                                                  return out;
                                              })
                                        .key;
        CalibrationArtifact cal = load_calibration(config.output_dir / cal_name);
        std::vector<Trace> post;
        for (const auto& t : cal.traces) post.push_back(t.after_burn_in(static_cast<std::size_t>(settings.mcmc.burn_in)));

        run.stage("diagnose-" + tag, {{"calibration", cal_key}}, [&](const fs::path& dir) {
            write_json(dir / "report.json", nlohmann::json(convergence_report(post)));
            return std::vector<std::string>{"report.json"};
        });

        const nlohmann::json pred_inputs = {{"calibration", cal_key},
                                            {"param_samples", config.predict_param_samples},
                                            {"gp_per_param", config.predict_gp_per_param},
                                            {"seed", config.predict_seed}};
        run.stage("predict-" + tag, pred_inputs, [&](const fs::path& dir) {
            PushForwardOptions po;
            po.param_samples = config.predict_param_samples;
            po.gp_per_param = config.predict_gp_per_param;
            po.seed = config.predict_seed;
            const auto draws = thin_draws(post, po.param_samples);
            const auto pf = push_forward(problem, basis, draws, PushForwardMode::Full, po);
            auto files = write_prediction(dir, pf, problem);
            const ScoreTable st = score(pf, problem);
            write_score_csv(dir / "crps.csv", st, data.dt);
            files.push_back("crps.csv");
            return files;
        });
        const nlohmann::json pj = read_json(config.output_dir / ("predict-" + tag) / "prediction.json");
        double avg = 0.0;
        for (const auto& s : pj.at("scenarios")) avg += s.at("crps").get<double>();
        avg /= static_cast<double>(std::max<std::size_t>(1, pj.at("scenarios").size()));
        sweep.push_back({{"l_gp", lgp}, {"average_crps", avg}});
    }
    if (options.sweep) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < sweep.size(); ++i)
            if (sweep[i]["average_crps"].get<double>() < sweep[best]["average_crps"].get<double>()) best = i;
        write_json(config.output_dir / "lgp_scores.json", {{"grid", sweep}, {"best_l_gp", sweep[best]["l_gp"]}});
    }
    run.write_manifest();
    return run.manifest_;
}

}  // namespace enor
