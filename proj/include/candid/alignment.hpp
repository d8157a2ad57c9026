#pragma once

// Dense optical flow from a reference frame to secondary frames, and
// backward warping of images and feature stacks into reference geometry.

#include <filesystem>
#include <vector>

#include "candid/image.hpp"
#include "candid/noise.hpp"
#include "candid/tensor.hpp"

namespace candid {

/// Reference pixel (x, y) corresponds to secondary location (x + dx, y + dy).
class FlowField {
 public:
  FlowField() = default;
  FlowField(int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }
  float& dx(int y, int x) { return dx_[index(y, x)]; }
  float& dy(int y, int x) { return dy_[index(y, x)]; }
  float dx(int y, int x) const { return dx_[index(y, x)]; }
  float dy(int y, int x) const { return dy_[index(y, x)]; }

  static FlowField constant(int height, int width, float dx, float dy);

  bool operator==(const FlowField&) const = default;

 private:
  std::size_t index(int y, int x) const { return static_cast<std::size_t>(y) * width_ + x; }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> dx_;
  std::vector<float> dy_;
};

struct LucasKanadeParams {
  int levels = 3;             // pyramid levels, factor 2
  int window_radius = 2;      // 5x5 binomial integration window
  int iterations = 10;        // refinement steps per level
  float regularization = 1e-4f;  // added to the structure tensor diagonal
  // Pixels whose structure tensor has a smaller minimum eigenvalue keep the
  // coarser estimate.
  float min_eigenvalue = 1e-7f;
  int min_level_size = 8;     // coarsest level keeps at least this many pixels per side
};

/// Pyramidal dense Lucas-Kanade. Color inputs are converted to luma.
FlowField estimate_flow(const Image& reference, const Image& secondary,
                        const LucasKanadeParams& params = {});

/// Backward warp: out(x, y) = data(x + dx, y + dy), bilinear, clamp-to-edge.
Image warp(const Image& data, const FlowField& flow);
/// Differentiable in `data` ([C, H, W]); the flow is a constant.
Tensor warp(const Tensor& data, const FlowField& flow);

/// Middlebury .flo: float 202021.25, int32 width, int32 height, then
/// interleaved (dx, dy) float32 rows, all little-endian.
FlowField read_flo(const std::filesystem::path& path);
void write_flo(const std::filesystem::path& path, const FlowField& flow);

class FlowEstimator {
 public:
  virtual ~FlowEstimator() = default;
  /// `frame_index` is the secondary frame's position in its burst (>= 1).
  virtual FlowField estimate(const Image& reference, const Image& secondary,
                             std::size_t frame_index) const = 0;
};

class LucasKanadeFlow final : public FlowEstimator {
 public:
  explicit LucasKanadeFlow(LucasKanadeParams params = {}) : params_(params) {}
  FlowField estimate(const Image& reference, const Image& secondary,
                     std::size_t frame_index) const override;

 private:
  LucasKanadeParams params_;
};

/// Always returns zero flow (alignment disabled).
class IdentityFlow final : public FlowEstimator {
 public:
  FlowField estimate(const Image& reference, const Image& secondary,
                     std::size_t frame_index) const override;
};

/// Precomputed fields <dir>/flow_001.flo ... flow_{N-1}.flo.
class FloDirectoryFlow final : public FlowEstimator {
 public:
  explicit FloDirectoryFlow(std::filesystem::path dir);
  FlowField estimate(const Image& reference, const Image& secondary,
                     std::size_t frame_index) const override;

 private:
  std::filesystem::path dir_;
};

std::string flow_filename(std::size_t index);

struct AlignedStream {
  std::vector<Image> images;
  std::vector<Tensor> features;
  std::vector<FlowField> flows;  // flows[0] is zero
};

/// Warps every secondary frame and its feature stack into the reference
/// geometry using flow estimated on this stream's own frames. Frame 0 and
/// its features pass through untouched.
AlignedStream align_stream(const Burst& stream, std::vector<Tensor> features,
                           const FlowEstimator& estimator);

}  // namespace candid
