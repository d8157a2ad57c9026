#pragma once

#include <filesystem>

#include "candid/image.hpp"

namespace candid {

/// Reads 8-bit PNG or binary PGM (P5) / PPM (P6) with maxval 255. Values are
/// mapped by v / 255. Alpha is dropped; gray-alpha loads as one channel.
Image load_image(const std::filesystem::path& path);

/// Writes PNG or PGM/PPM chosen by extension (.png, .pgm, .ppm), quantizing
/// with round-half-up after clamping to [0, 1].
void save_image(const Image& img, const std::filesystem::path& path);

bool is_image_file(const std::filesystem::path& path);

}  // namespace candid
