#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pyroclass {

/// Writes `bytes` to a sibling temporary file and renames it over `path`, so
/// readers never observe a partially written file. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

}  // namespace pyroclass
