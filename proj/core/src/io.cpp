#include "enor/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "enor/error.hpp"

namespace enor {

static_assert(std::endian::native == std::endian::little, "binary field files assume a little-endian host");

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("short write to " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void write_field_binary(const fs::path& path, const Field& f) {
    std::string bytes(static_cast<std::size_t>(f.size()) * sizeof(double), '\0');
    std::memcpy(bytes.data(), f.data(), bytes.size());
    write_text(path, bytes);
}

Field read_field_binary(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
    const std::string bytes = read_text(path);
    if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double))
        throw IoError(fmt::format("{}: expected {}x{} doubles, found {} bytes", path.string(), rows, cols, bytes.size()));
    Field f(rows, cols);
    std::memcpy(f.data(), bytes.data(), bytes.size());
    return f;
}

void write_field_csv(const fs::path& path, const Field& f) {
    std::string text;
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
        for (Eigen::Index c = 0; c < f.cols(); ++c) {
            if (c) text += ',';
            text += fmt::format("{:.17g}", f(r, c));
        }
        text += '\n';
    }
    write_text(path, text);
}

Field read_field_csv(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError(fmt::format("{}: bad number '{}'", path.string(), cell));
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError(path.string() + ": ragged CSV rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path.string() + ": empty CSV");
    Field f(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) f(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return f;
}

void write_table_csv(const fs::path& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows) {
    std::string text = fmt::format("{}\n", fmt::join(header, ","));
    for (const auto& row : rows) text += fmt::format("{:.17g}\n", fmt::join(row, ","));
    write_text(path, text);
}

}  // namespace enor
