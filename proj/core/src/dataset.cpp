#include "enor/dataset.hpp"

#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "enor/error.hpp"
#include "enor/io.hpp"

namespace enor {

void WaveDataset::validate() const {
    micro.validate();
    if (!(dx > 0.0) || !(dt > 0.0)) throw InvalidArgument("dataset grid spacings must be positive");
    if (x.size() < 2) throw InvalidArgument("dataset needs at least two grid points");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (std::abs(x[i] - x[i - 1] - dx) > 1e-9 * dx) throw InvalidArgument("dataset x-grid is not uniform");
    if (u.size() != scenarios.size()) throw InvalidArgument("dataset: one field per scenario required");
    for (std::size_t s = 0; s < u.size(); ++s) {
        if (u[s].cols() != points() || u[s].rows() != frames())
            throw InvalidArgument(fmt::format("dataset: scenario {} has shape {}x{}", s, u[s].rows(), u[s].cols()));
        if (!u[s].allFinite()) throw InvalidArgument(fmt::format("dataset: scenario {} has non-finite values", s));
    }
}

WaveDataset WaveDataset::truncated(double t_end, const std::vector<std::size_t>& keep) const {
    const auto n = static_cast<Eigen::Index>(std::llround(t_end / dt)) + 1;
    if (n < 2 || n > frames()) throw InvalidArgument(fmt::format("cannot truncate dataset to T = {}", t_end));
    WaveDataset out = *this;
    out.scenarios.clear();
    out.u.clear();
    std::vector<std::size_t> idx = keep;
    if (idx.empty())
        for (std::size_t s = 0; s < scenarios.size(); ++s) idx.push_back(s);
    for (std::size_t s : idx) {
        if (s >= scenarios.size()) throw InvalidArgument(fmt::format("scenario index {} out of range", s));
        out.scenarios.push_back(scenarios[s]);
        out.u.push_back(u[s].topRows(n));
    }
    return out;
}

namespace {

nlohmann::json material_json(const MaterialSpec& m) {
    return {{"L", m.length},
            {"b", m.layer},
            {"D", m.disorder},
            {"seed", m.seed},
            {"E1", m.materials.modulus1},
            {"E2", m.materials.modulus2},
            {"rho", m.materials.density}};
}

MaterialSpec material_from_json(const nlohmann::json& j) {
    MaterialSpec m;
    m.length = j.at("L").get<double>();
    m.layer = j.at("b").get<double>();
    m.disorder = j.at("D").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.materials.modulus1 = j.at("E1").get<double>();
    m.materials.modulus2 = j.at("E2").get<double>();
    m.materials.density = j.at("rho").get<double>();
    return m;
}

nlohmann::json manifest_json(const WaveDataset& d) {
    nlohmann::json scen = nlohmann::json::array();
    for (const auto& s : d.scenarios) scen.push_back(s);
    return {{"format_version", 1},
            {"generator", d.generator},
            {"seed", d.seed},
            {"units", {{"length", "L"}, {"time", "T"}, {"displacement", "L"}}},
            {"grid", {{"dx", d.dx}, {"dt", d.dt}, {"x0", d.x.front()}, {"points", d.x.size()}, {"frames", d.frames()}}},
            {"material", material_json(d.material)},
            {"microstructure", d.micro},
            {"scenarios", scen}};
}

}  // namespace

std::string WaveDataset::content_hash() const {
    std::string bytes = manifest_json(*this).dump();
    for (const auto& f : u)
        bytes.append(reinterpret_cast<const char*>(f.data()), static_cast<std::size_t>(f.size()) * sizeof(double));
    return sha256_hex(bytes);
}

WaveDataset generate_dataset(const MaterialSpec& material, const std::vector<LoadingScenario>& scenarios,
                             const DnsOptions& options, std::uint64_t seed) {
    WaveDataset d;
    d.material = material;
    d.micro = material.build();
    d.dx = options.dx;
    d.dt = options.dt;
    d.x = uniform_grid(d.micro.length(), options.dx);
    d.seed = seed;
    d.scenarios = scenarios;
    for (const auto& s : scenarios) d.u.push_back(dns_solve(d.micro, s, options));
    d.validate();
    return d;
}

void save_dataset(const WaveDataset& d, const std::filesystem::path& dir, FieldFormat format) {
    d.validate();
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = manifest_json(d);
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t s = 0; s < d.u.size(); ++s) {
        const std::string name =
            fmt::format("{:03d}_{}.{}", s, d.scenarios[s].label(), format == FieldFormat::Binary ? "bin" : "csv");
        if (format == FieldFormat::Binary)
            write_field_binary(dir / name, d.u[s]);
        else
            write_field_csv(dir / name, d.u[s]);
        files.push_back(name);
    }
    manifest["files"] = files;
    manifest["encoding"] = format == FieldFormat::Binary ? "f64le" : "csv";
    write_json(dir / "manifest.json", manifest);
}

WaveDataset load_dataset(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) throw IoError("no dataset manifest in " + dir.string());
    const nlohmann::json m = read_json(manifest_path);
    WaveDataset d;
    try {
        d.generator = m.at("generator").get<std::string>();
        d.seed = m.at("seed").get<std::uint64_t>();
        const auto& grid = m.at("grid");
        d.dx = grid.at("dx").get<double>();
        d.dt = grid.at("dt").get<double>();
        const auto points = grid.at("points").get<Eigen::Index>();
        const auto frames = grid.at("frames").get<Eigen::Index>();
        d.material = material_from_json(m.at("material"));
        d.micro = m.at("microstructure").get<Microstructure>();
        d.x = uniform_grid(d.micro.length(), d.dx);
        if (static_cast<Eigen::Index>(d.x.size()) != points) throw IoError("manifest point count disagrees with grid");
        for (const auto& s : m.at("scenarios")) d.scenarios.push_back(s.get<LoadingScenario>());
        const bool binary = m.at("encoding").get<std::string>() == "f64le";
        for (const auto& f : m.at("files")) {
            const auto path = dir / f.get<std::string>();
            Field u = binary ? read_field_binary(path, frames, points) : read_field_csv(path);
            d.u.push_back(std::move(u));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(fmt::format("{}: malformed manifest ({})", manifest_path.string(), e.what()));
    }
    d.validate();
    return d;
}

}  // namespace enor
