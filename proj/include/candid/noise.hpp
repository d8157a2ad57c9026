#pragma once

// Heteroscedastic Gaussian noise (read + shot) and synthetic burst
// generation from a clean image.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "candid/image.hpp"
#include "candid/rng.hpp"

namespace candid {

struct NoiseParams {
  double sigma_r = 0.0;  // readout std, [0,1] pixel units
  double sigma_s = 0.0;  // shot coefficient

  /// sigma_r^2 + sigma_s^2 * x
  double variance(double x) const { return sigma_r * sigma_r + sigma_s * sigma_s * x; }
};

enum class NoiseLevel { Train, Lvl1, Lvl2 };

NoiseLevel parse_noise_level(const std::string& text);
std::string to_string(NoiseLevel level);

/// Train: log10 sigma_r ~ U[-3, -1.5], log10 sigma_s ~ U[-4, -2].
/// Lvl1 / Lvl2: the fixed evaluation pairs (-2.2, -2.6) / (-1.8, -2.2).
NoiseParams sample_noise_params(Rng& rng, NoiseLevel level);

/// Adds zero-mean Gaussian noise of variance params.variance(clean) to each
/// sample, then clamps to [0, 1].
Image add_noise(const Image& clean, const NoiseParams& params, Rng& rng);

struct Shift {
  double dx = 0.0;
  double dy = 0.0;
};

/// Frames share dimensions; frame 0 is the reference.
struct Burst {
  std::vector<Image> frames;
  NoiseParams params;
  std::vector<Shift> true_shifts;  // empty when unknown

  std::size_t size() const { return frames.size(); }
  const Image& reference() const { return frames.at(0); }
  void validate() const;
};

struct SyntheticBurst {
  Burst burst;
  Image ground_truth;  // geometry of frame 0
};

/// Frame 0 is the noisy ground truth; frame i > 0 is the noisy ground truth
/// shifted by a uniform draw in [-max_shift, max_shift]^2 (rounded to whole
/// pixels when integer_shifts is set). Noise for each frame comes from its
/// own stream derived from `rng`.
SyntheticBurst synthesize_burst(const Image& ground_truth, int n, double max_shift,
                                const NoiseParams& params, Rng& rng,
                                bool integer_shifts = false);

/// Burst directory: frame_000.png ... frame_{N-1}.png, optional gt.png, and
/// meta.json with sigma_r, sigma_s, true_shifts, seed.
void write_burst_dir(const std::filesystem::path& dir, const SyntheticBurst& burst,
                     std::uint64_t seed);

struct LoadedBurst {
  Burst burst;
  std::optional<Image> ground_truth;
};

LoadedBurst read_burst_dir(const std::filesystem::path& dir);

std::string frame_filename(std::size_t index);

}  // namespace candid
