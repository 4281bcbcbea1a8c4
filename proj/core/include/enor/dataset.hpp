#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "enor/dns.hpp"
#include "enor/field.hpp"
#include "enor/loading.hpp"
#include "enor/microstructure.hpp"

namespace enor {

/// Parameters from which a microstructure was generated.
struct MaterialSpec {
    double length = 20.0;
    double layer = 0.2;
    double disorder = 0.0;
    std::uint64_t seed = 0;
    MaterialPair materials{};

    Microstructure build() const { return build_microstructure(length, layer, disorder, seed, materials); }
};

/// Gridded displacement data u[s](n, i) for S loading scenarios on a common grid.
struct WaveDataset {
    std::vector<double> x;
    double dx = 0.05;
    double dt = 0.02;
    MaterialSpec material;
    Microstructure micro;
    std::vector<LoadingScenario> scenarios;
    std::vector<Field> u;
    std::uint64_t seed = 0;
    std::string generator = "enor-dns";

    std::size_t scenario_count() const noexcept { return scenarios.size(); }
    Eigen::Index frames() const { return u.empty() ? 0 : u.front().rows(); }
    Eigen::Index points() const { return static_cast<Eigen::Index>(x.size()); }
    double final_time() const { return dt * static_cast<double>(frames() - 1); }
    double length() const { return micro.length(); }

    /// Throws InvalidArgument on inconsistent shapes, non-uniform grids or non-finite data.
    void validate() const;

    /// Copy keeping frames t <= final_time and the selected scenarios (all if empty).
    WaveDataset truncated(double final_time, const std::vector<std::size_t>& keep = {}) const;

    /// Content hash over metadata and all samples.
    std::string content_hash() const;
};

enum class FieldFormat { Binary, Csv };

WaveDataset generate_dataset(const MaterialSpec& material, const std::vector<LoadingScenario>& scenarios,
                             const DnsOptions& options, std::uint64_t seed);

/// Directory layout: manifest.json plus one matrix per scenario (row = frame, column = grid point).
void save_dataset(const WaveDataset& data, const std::filesystem::path& dir, FieldFormat format = FieldFormat::Binary);
WaveDataset load_dataset(const std::filesystem::path& dir);

}  // namespace enor
