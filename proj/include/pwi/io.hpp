#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pwi {

/// Throws DataError(MissingFile) if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary(const std::filesystem::path& path);

/// Writes to "<path>.tmp" and renames over the target, so readers never see
/// a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& contents);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

std::string base64_encode(const std::vector<std::uint8_t>& data);

}  // namespace pwi
