#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace candid {

using Rng = std::mt19937_64;

/// Deterministic child seed for independent streams (per frame, per step,
/// per image) derived from a root seed.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

/// FNV-1a, used to key per-image seeds by file name.
std::uint64_t hash_name(std::string_view name);

}  // namespace candid
