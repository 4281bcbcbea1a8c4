#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "enor/field.hpp"

namespace enor {

namespace fs = std::filesystem;

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const fs::path& path);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, std::string_view text);

nlohmann::json read_json(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);

/// Raw little-endian float64, row-major.
void write_field_binary(const fs::path& path, const Field& f);
Field read_field_binary(const fs::path& path, Eigen::Index rows, Eigen::Index cols);

/// Comma separated, one row per line, 17 significant digits.
void write_field_csv(const fs::path& path, const Field& f);
Field read_field_csv(const fs::path& path);

/// CSV with a header line.
void write_table_csv(const fs::path& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows);

}  // namespace enor
