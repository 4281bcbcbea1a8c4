#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "enor/calibrate.hpp"
#include "enor/config.hpp"
#include "enor/diagnostics.hpp"

namespace enor {

/// Library version, part of every cache key.
std::string version();

struct StageRecord {
    std::string name;
    std::string key;  ///< SHA-256 of the stage inputs, upstream keys and version
    bool cache_hit = false;
    double seconds = 0.0;
    std::vector<std::string> outputs;  ///< relative to the run directory
};

struct RunManifest {
    std::string version;
    nlohmann::json config;
    std::vector<StageRecord> stages;

    const StageRecord* find(const std::string& name) const;
};

void to_json(nlohmann::json& j, const StageRecord& r);
void to_json(nlohmann::json& j, const RunManifest& m);

struct PipelineOptions {
    /// Calibrate, diagnose and score every l_gp of the grid (the primary l_gp otherwise).
    bool sweep = false;
    /// Ignore cached stage outputs.
    bool force = false;
    ProgressSink progress;
};

/// data -> fit -> (per l_gp) kle -> calibrate -> diagnose -> predict, each stage
/// skipped when its key matches the stored one. Writes manifest.json in the output directory.
RunManifest run_pipeline(const ExperimentConfig& config, const PipelineOptions& options = {});

/// Stage building blocks, shared with the command line verbs.
WaveDataset make_dataset(const ExperimentConfig& config);
PhysicsTargets make_targets(const ExperimentConfig& config);
CalibrationProblem make_problem(const ExperimentConfig& config, const WaveDataset& data, const PhysicsTargets& targets);

/// Fit stage output: targets and fitted free coefficients.
struct FitArtifact {
    PhysicsTargets targets;
    FitResult fit;
};
void save_fit(const std::filesystem::path& file, const FitArtifact& a);
FitArtifact load_fit(const std::filesystem::path& file);

/// Calibration stage output directory: calibration.json plus chain_<c>.csv.
void save_calibration(const std::filesystem::path& dir, const CalibrationResult& r);
struct CalibrationArtifact {
    PosteriorSpec spec;
    std::vector<Trace> traces;
    nlohmann::json summary;
};
CalibrationArtifact load_calibration(const std::filesystem::path& dir);

/// Per-scenario spatial-average CRPS at the kept frames; one row per scenario.
struct ScoreTable {
    std::vector<std::string> scenarios;
    std::vector<Eigen::Index> frames;
    Eigen::MatrixXd crps;  ///< scenarios x kept frames
    double average() const { return crps.size() ? crps.mean() : 0.0; }
};
ScoreTable score(const PushForwardSummary& pf, const CalibrationProblem& problem);
void write_score_csv(const std::filesystem::path& file, const ScoreTable& t, double dt);

/// Writes bands (one CSV per scenario and kept frame) and a summary JSON into `dir`;
/// with `samples`, also the raw realizations as samples_s<s>_n<n>.bin (realizations x points).
std::vector<std::string> write_prediction(const std::filesystem::path& dir, const PushForwardSummary& pf,
                                          const CalibrationProblem& problem, bool samples = false);

/// Realizations written by write_prediction, keyed like PushForwardSummary::samples.
PushForwardSummary read_prediction_samples(const std::filesystem::path& dir);

}  // namespace enor
