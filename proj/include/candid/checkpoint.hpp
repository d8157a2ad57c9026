#pragma once

// Binary tensor container:
//   "CNDD" | u32 version | records...
//   record = u32 name_len | name bytes | u32 rank | u32 dims[rank] | f32 data[]
// All integers and floats little-endian. Records run to end of file.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "candid/tensor.hpp"

namespace candid {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;

  bool operator==(const NamedTensor&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> records);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes through a temporary file so a failed save leaves no partial file.
void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> records);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace candid
