#pragma once

// The trainable part of the burst denoiser: shared per-frame feature
// extraction, collaborative per-pixel kernel prediction and application per
// stream, and per-pixel, per-channel fusion across all streams.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "candid/alignment.hpp"
#include "candid/checkpoint.hpp"
#include "candid/image.hpp"
#include "candid/noise.hpp"
#include "candid/prefilter.hpp"
#include "candid/tensor.hpp"

namespace candid {

struct ArchConfig {
  int channels = 1;  // image channels C
  int burst_size = 4;  // N
  int feature_channels = 8;  // F
  int feature_hidden = 16;
  int kernel_hidden = 64;
  int fusion_hidden = 64;
  bool use_prefilter = true;  // false: raw stream only
  bool use_align = true;  // false: identity flow
  bool use_adaptive_filter = true;  // false: fuse aligned images unfiltered

  int stream_count() const { return use_prefilter ? static_cast<int>(kStreamCount) : 1; }
  /// M, the number of candidate images entering fusion.
  int fused_images() const { return stream_count() * burst_size; }
  void validate() const;
};

inline constexpr int kKernelTaps = 3 * 3 + 5 * 5;

enum class FinalLayerInit {
  Zero,    // uniform kernels and uniform fusion weights at start
  Random,  // He-uniform like every other layer
};

class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(std::string name, int in_channels, int out_channels, int kernel_size);

  Tensor operator()(const Tensor& input) const;
  void init_he_uniform(std::uint64_t seed);
  void init_zero();

  const std::string& name() const { return name_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  std::string name_;
  Tensor weight_;
  Tensor bias_;
};

struct KernelVolumes {
  Tensor k3;  // [N, H, W, 3, 3]
  Tensor k5;  // [N, H, W, 5, 5]
};

struct FusionResult {
  Tensor image;    // [C, H, W]
  Tensor weights;  // [M, C, H, W], softmax over M
};

struct ForwardTrace {
  Tensor output;                       // [C, H, W]
  std::vector<KernelVolumes> kernels;  // per stream; empty without adaptive filtering
  std::vector<Tensor> filtered;        // per stream, [N, C, H, W]
  std::vector<AlignedStream> aligned;  // per stream
  Tensor fusion_weights;               // [M, C, H, W]
};

/// Non-trainable stages feeding the network. Their outputs enter the graph
/// as constants, so no gradient reaches them.
struct FrozenStages {
  const FrameDenoiser& prefilter;
  const FlowEstimator& flow;
};

/// Per-pixel noise level sqrt(sigma_r^2 + sigma_s^2 * y), y the observed
/// value averaged over channels. Shape [1, H, W].
Tensor noise_level_map(const Image& frame, const NoiseParams& params);

/// images [N, C, H, W], kernels [N, H, W, k, k] -> [N, C, H, W]. Each output
/// pixel is the kernel-weighted sum of its k x k clamp-to-edge
/// neighbourhood. Differentiable in both arguments.
Tensor apply_kernels(const Tensor& images, const Tensor& kernels);

/// Stacks frames into [N, C, H, W].
Tensor stack_images(std::span<const Image> frames);

/// Largest |sum - 1| over every per-pixel kernel of a [N, H, W, k, k] volume.
double kernel_normalization_error(const Tensor& kernels);
/// Largest |sum over M - 1| of a [M, C, H, W] weight volume.
double fusion_normalization_error(const Tensor& weights);

class DenoiseNet {
 public:
  DenoiseNet(ArchConfig config, std::uint64_t seed,
             FinalLayerInit final_init = FinalLayerInit::Zero);

  const ArchConfig& config() const { return config_; }

  /// [C + 1, H, W] input (image plus noise level) -> [F, H, W].
  Tensor extract_features(const Image& frame, const NoiseParams& params) const;
  /// N aligned [F, H, W] stacks of one stream -> normalized kernel volumes.
  KernelVolumes predict_kernels(std::span<const Tensor> aligned_features) const;
  /// filtered [M, C, H, W] plus every stream's aligned features.
  FusionResult fuse(const Tensor& filtered, std::span<const Tensor> aligned_features) const;

  ForwardTrace forward(const Burst& burst, const FrozenStages& stages) const;
  /// Convenience: built-in bilateral pre-filter and Lucas-Kanade flow.
  ForwardTrace forward(const Burst& burst) const;

  std::vector<Tensor> parameters() const;
  std::vector<NamedTensor> state() const;
  /// Throws on any name or shape disagreement with this architecture.
  void load_state(std::span<const NamedTensor> records);

 private:
  ArchConfig config_;
  std::vector<Conv2dLayer> features_;
  std::vector<Conv2dLayer> kernels_;
  std::vector<Conv2dLayer> fusion_;
};

/// Recovers architecture sizes and variant flags from checkpoint tensor
/// shapes. `burst_size` is used when the shapes do not determine N.
/// use_align cannot be recovered and is taken from `base`.
ArchConfig infer_arch(std::span<const NamedTensor> records, int burst_size, ArchConfig base = {});

}  // namespace candid
