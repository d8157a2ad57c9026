#pragma once

// Single-frame pre-denoising that turns one burst into three streams:
// raw, mildly filtered, strongly filtered.

#include <array>
#include <filesystem>

#include "candid/image.hpp"
#include "candid/noise.hpp"

namespace candid {

enum class Strength { Mild, Strong };

enum class StreamKind : std::size_t { Raw = 0, Mild = 1, Strong = 2 };
inline constexpr std::size_t kStreamCount = 3;

struct BilateralParams {
  int radius = 2;  // 5x5 window
  float spatial_sigma = 1.5f;
  float range_sigma = 10.0f / 255.0f;

  static BilateralParams for_strength(Strength strength);
};

/// Edge-preserving bilateral filter with clamp-to-edge borders. Range
/// distance is Euclidean over channels.
Image bilateral_filter(const Image& img, const BilateralParams& params);

/// Default pre-filter: bilateral, range sigma 10/255 (mild) or 30/255 (strong).
Image prefilter_frame(const Image& img, Strength strength);

/// Pluggable single-frame denoiser. `frame_index` lets ingesting
/// implementations find the matching file.
class FrameDenoiser {
 public:
  virtual ~FrameDenoiser() = default;
  virtual Image denoise(const Image& frame, Strength strength, std::size_t frame_index) const = 0;
};

class BilateralDenoiser final : public FrameDenoiser {
 public:
  Image denoise(const Image& frame, Strength strength, std::size_t frame_index) const override;
};

/// Reads pre-filtered frames from <root>/mild/frame_XXX.png and
/// <root>/strong/frame_XXX.png.
class DirectoryDenoiser final : public FrameDenoiser {
 public:
  explicit DirectoryDenoiser(std::filesystem::path root);
  Image denoise(const Image& frame, Strength strength, std::size_t frame_index) const override;

 private:
  std::filesystem::path root_;
};

struct StreamSet {
  std::array<Burst, kStreamCount> streams;

  const Burst& operator[](StreamKind kind) const { return streams[static_cast<std::size_t>(kind)]; }
  const NoiseParams& params() const { return streams[0].params; }
};

StreamSet make_streams(const Burst& burst, const FrameDenoiser& denoiser);
StreamSet make_streams(const Burst& burst);

}  // namespace candid
