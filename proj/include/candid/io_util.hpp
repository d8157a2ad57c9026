#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace candid {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to "<path>.tmp" and renames over `path`; the temporary is removed
/// if anything fails.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace candid
