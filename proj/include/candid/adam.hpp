#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "candid/tensor.hpp"

namespace candid {

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;

  void validate() const;
};

/// Moment estimates for a fixed, ordered parameter list.
class AdamState {
 public:
  AdamState(AdamConfig config, std::span<const Tensor> params);

  const AdamConfig& config() const { return config_; }
  std::uint64_t step_count() const { return step_count_; }

  std::vector<std::vector<float>>& first_moment() { return first_; }
  std::vector<std::vector<float>>& second_moment() { return second_; }
  const std::vector<std::vector<float>>& first_moment() const { return first_; }
  const std::vector<std::vector<float>>& second_moment() const { return second_; }

  // Used when restoring a saved optimizer state.
  void set_step_count(std::uint64_t steps) { step_count_ = steps; }

 private:
  friend void adam_step(std::span<Tensor> params, AdamState& state);

  AdamConfig config_;
  std::uint64_t step_count_ = 0;
  std::vector<std::vector<float>> first_;
  std::vector<std::vector<float>> second_;
};

/// One bias-corrected ADAM update, in place. Gradients are left untouched.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace candid
