#pragma once

// Dataset ingestion, the end-to-end training loop, evaluation on
// synthesized bursts, and the component ablation runner.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "candid/adam.hpp"
#include "candid/denoise_net.hpp"
#include "candid/noise.hpp"
#include "json.hpp"

namespace candid {

// ---------------------------------------------------------------- config

struct AblationFlags {
  bool no_prefilter = false;
  bool no_align = false;
  bool no_adaptive_filter = false;
};

struct TrainConfig {
  int patch_size = 48;
  int burst_size = 4;
  double max_shift = 4.0;
  int batch_size = 1;
  int total_steps = 5000;
  std::uint64_t seed = 0;
  NoiseLevel noise_mode = NoiseLevel::Train;
  int checkpoint_every = 500;
  int probe_every = 500;
  AdamConfig optimizer;
  ArchConfig architecture{.kernel_hidden = 32, .fusion_hidden = 32};
  std::filesystem::path dataset_dir;
  std::filesystem::path checkpoint_path = "model.ckpt";
  AblationFlags ablation;

  /// Value checks; `check_paths` additionally requires the dataset directory
  /// and the checkpoint's parent directory to exist.
  void validate(bool check_paths = false) const;
  /// Architecture with burst size and ablation flags applied.
  ArchConfig arch() const;
};

/// Strict parse: every key must be a known TrainConfig key (nested objects
/// included) and carry the right type. Missing keys keep their defaults.
TrainConfig parse_train_config(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);
nlohmann::json to_json(const TrainConfig& config);

// ---------------------------------------------------------------- dataset

struct NamedImage {
  std::string name;  // file name within the dataset directory
  Image image;
};

/// Every image file in `dir` (non-recursive), sorted by name, converted to
/// `channels` (luma for 1, gray replicated for 3).
std::vector<NamedImage> load_images(const std::filesystem::path& dir, int channels);

struct CropOrigin {
  std::size_t image = 0;
  int y = 0;
  int x = 0;
};

/// Uniform random crops: image uniformly among those at least patch_size on
/// both sides, origin uniformly over its valid range.
class PatchSampler {
 public:
  PatchSampler(std::vector<Image> images, int patch_size);
  static PatchSampler from_directory(const std::filesystem::path& dir, int patch_size, int channels);

  CropOrigin sample_origin(Rng& rng) const;
  Image sample(Rng& rng) const;
  std::size_t image_count() const { return images_.size(); }
  const Image& image(std::size_t i) const { return images_.at(i); }
  int patch_size() const { return patch_size_; }

 private:
  std::vector<Image> images_;
  int patch_size_;
};

// ---------------------------------------------------------------- models

/// Anything that turns a noisy burst into an estimate of the clean
/// reference frame.
class BurstDenoiser {
 public:
  virtual ~BurstDenoiser() = default;
  virtual std::string name() const = 0;
  virtual Image denoise(const Burst& burst) const = 0;
};

/// Returns the noisy reference frame unchanged.
class NoisyReferenceModel final : public BurstDenoiser {
 public:
  std::string name() const override { return "noisy_reference"; }
  Image denoise(const Burst& burst) const override;
};

/// Aligns the raw frames to the reference and averages them.
class MeanOfAlignedModel final : public BurstDenoiser {
 public:
  explicit MeanOfAlignedModel(std::shared_ptr<const FlowEstimator> flow = nullptr);
  std::string name() const override { return "mean_of_aligned"; }
  Image denoise(const Burst& burst) const override;

 private:
  std::shared_ptr<const FlowEstimator> flow_;
};

class NetworkModel final : public BurstDenoiser {
 public:
  NetworkModel(std::shared_ptr<const DenoiseNet> net,
               std::shared_ptr<const FrameDenoiser> prefilter = nullptr,
               std::shared_ptr<const FlowEstimator> flow = nullptr);
  std::string name() const override { return "candid"; }
  Image denoise(const Burst& burst) const override;
  const DenoiseNet& net() const { return *net_; }

 private:
  std::shared_ptr<const DenoiseNet> net_;
  std::shared_ptr<const FrameDenoiser> prefilter_;
  std::shared_ptr<const FlowEstimator> flow_;
};

/// Builds a network whose dimensions are read from the checkpoint.
std::shared_ptr<DenoiseNet> load_model(const std::filesystem::path& checkpoint, int burst_size,
                                       bool use_align = true);

// ---------------------------------------------------------------- training

struct TrainOptions {
  bool resume = false;  // continue from checkpoint_path and its .state file
  /// Called after every step with (step, mean batch loss).
  std::function<void(int, double)> on_step;
};

struct TrainResult {
  int steps_run = 0;
  int final_step = 0;
  double final_loss = 0.0;
  std::vector<double> losses;  // one per step run in this call
};

/// Optimizer-state companion of a checkpoint: "<checkpoint>.state".
std::filesystem::path optimizer_state_path(const std::filesystem::path& checkpoint);
/// Training log: "<checkpoint>.log.csv" with header "step,loss,psnr_probe".
std::filesystem::path train_log_path(const std::filesystem::path& checkpoint);

TrainResult train(const TrainConfig& config, const TrainOptions& options = {});

// ---------------------------------------------------------------- evaluation

struct EvalOptions {
  NoiseLevel level = NoiseLevel::Lvl1;
  std::uint64_t seed = 0;
  int burst_size = 4;
  double max_shift = 4.0;
  int channels = 1;
};

struct ImageScore {
  std::string name;
  double psnr = 0.0;
  double noisy_psnr = 0.0;  // noisy reference frame vs ground truth
};

struct EvalReport {
  std::string model;
  std::string variant = "full";
  EvalOptions options;
  std::vector<ImageScore> images;
  double mean_psnr = 0.0;
  double mean_noisy_psnr = 0.0;
  nlohmann::json config;  // echo of the producing configuration, may be null

  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Per-image seed: derive_seed(seed, hash_name(file name)).
EvalReport evaluate(const BurstDenoiser& model, const std::vector<NamedImage>& dataset,
                    const EvalOptions& options);
EvalReport evaluate(const BurstDenoiser& model, const std::filesystem::path& dataset_dir,
                    const EvalOptions& options);

// ---------------------------------------------------------------- ablation

enum class AblationVariant { Full, NoPrefilter, NoAlign, NoAdaptiveFilter };

AblationVariant parse_ablation_variant(const std::string& text);
std::string to_string(AblationVariant variant);
AblationFlags flags_for(AblationVariant variant);

/// Trains `variant` from scratch with `config` (its ablation flags are
/// replaced), then evaluates the result on `eval_dir`.
EvalReport ablate(TrainConfig config, AblationVariant variant,
                  const std::filesystem::path& eval_dir, const EvalOptions& eval_options);

}  // namespace candid
