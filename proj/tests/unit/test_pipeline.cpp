#include <filesystem>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "enor/error.hpp"
#include "enor/config.hpp"
#include "enor/io.hpp"
#include "enor/pipeline.hpp"

#include "fixtures.hpp"

using namespace enor;

namespace {

ExperimentConfig tiny(const std::filesystem::path& out) {
    ExperimentConfig c = default_config();
    c.material.length = 6.0;
    c.final_time = 0.2;
    c.degree = 4;
    c.setting1 = {2.0, 5.0};
    c.setting2 = {};
    c.fit.max_iterations = 5;
    auto& cal = c.calibration;
    cal.posterior.lgp = 3.0;
    cal.posterior.ensemble_size = 3;
    cal.posterior.aem_draws = 3;
    cal.init_points = 3;
    cal.bound_probes = 2;
    cal.bound_rounds = 1;
    cal.mcmc.chains = 2;
    cal.mcmc.draws = 6;
    cal.mcmc.burn_in = 2;
    cal.mcmc.nsub = 2;
    c.lgp_grid = {12.0, 3.0};
    c.predict_param_samples = 2;
    c.predict_gp_per_param = 2;
    c.output_dir = out;
    return c;
}

std::map<std::string, bool> hits(const RunManifest& m) {
    std::map<std::string, bool> h;
    for (const auto& s : m.stages) h[s.name] = s.cache_hit;
    return h;
}

}  // namespace

TEST(Pipeline, RerunIsAllCacheHitsAndLgpChangeKeepsData) {
    const auto dir = support::scratch_dir("pipeline");
    ExperimentConfig c = tiny(dir);
    ASSERT_TRUE(validate_config(c).empty());

    const RunManifest first = run_pipeline(c);
    ASSERT_EQ(first.stages.size(), 6u);
    for (const auto& s : first.stages) EXPECT_FALSE(s.cache_hit) << s.name;
    for (const auto& s : first.stages)
        for (const auto& o : s.outputs) EXPECT_TRUE(std::filesystem::exists(dir / o)) << o;
    const std::string chain = read_text(dir / "calibrate-lgp3" / "chain_0.csv");

    const RunManifest second = run_pipeline(c);
    for (const auto& s : second.stages) EXPECT_TRUE(s.cache_hit) << s.name;

    c.calibration.posterior.lgp = 1.5;
    const RunManifest third = run_pipeline(c);
    const auto h = hits(third);
    EXPECT_TRUE(h.at("data"));
    EXPECT_TRUE(h.at("fit"));
    EXPECT_FALSE(h.at("kle-lgp1.5"));
    EXPECT_FALSE(h.at("calibrate-lgp1.5"));
    EXPECT_FALSE(h.at("predict-lgp1.5"));

    // Forced recomputation reproduces the stored traces byte for byte.
    c.calibration.posterior.lgp = 3.0;
    PipelineOptions force;
    force.force = true;
    run_pipeline(c, force);
    EXPECT_EQ(read_text(dir / "calibrate-lgp3" / "chain_0.csv"), chain);

    const nlohmann::json manifest = read_json(dir / "manifest.json");
    EXPECT_EQ(manifest.at("version").get<std::string>(), version());
}

TEST(Pipeline, SweepWritesBestLgp) {
    const auto dir = support::scratch_dir("sweep");
    ExperimentConfig c = tiny(dir);
    PipelineOptions o;
    o.sweep = true;
    const RunManifest m = run_pipeline(c, o);
    EXPECT_TRUE(m.find("calibrate-lgp12") != nullptr);
    EXPECT_TRUE(m.find("calibrate-lgp3") != nullptr);
    const nlohmann::json s = read_json(dir / "lgp_scores.json");
    EXPECT_EQ(s.at("grid").size(), 2u);
    EXPECT_TRUE(s.contains("best_l_gp"));
}

TEST(Pipeline, InvalidConfigRejectedBeforeAnyStage) {
    const auto dir = support::scratch_dir("invalid");
    ExperimentConfig c = tiny(dir);
    c.material.disorder = 1.0;
    EXPECT_THROW(run_pipeline(c), InvalidArgument);
    EXPECT_FALSE(std::filesystem::exists(dir / "manifest.json"));
}

TEST(Pipeline, FitArtifactRoundTrip) {
    const auto dir = support::scratch_dir("fitart");
    ExperimentConfig c = tiny(dir);
    const WaveDataset data = make_dataset(c);
    FitArtifact a;
    a.targets = make_targets(c);
    const CalibrationProblem p = make_problem(c, data, a.targets);
    a.fit = fit_nor(p, c.fit);
    save_fit(dir / "fit.json", a);
    const FitArtifact b = load_fit(dir / "fit.json");
    EXPECT_EQ((b.fit.free - a.fit.free).norm(), 0.0);
    EXPECT_EQ(b.targets.c0, a.targets.c0);
    EXPECT_EQ((b.fit.kernel.C - a.fit.kernel.C).norm(), 0.0);
}
