#include "candid/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace candid {

void AdamConfig::validate() const {
  if (!(lr > 0.0f)) throw std::invalid_argument("adam: lr must be positive");
  if (!(beta1 >= 0.0f && beta1 < 1.0f)) throw std::invalid_argument("adam: beta1 must be in [0,1)");
  if (!(beta2 >= 0.0f && beta2 < 1.0f)) throw std::invalid_argument("adam: beta2 must be in [0,1)");
  if (!(epsilon > 0.0f)) throw std::invalid_argument("adam: epsilon must be positive");
}

AdamState::AdamState(AdamConfig config, std::span<const Tensor> params) : config_(config) {
  config_.validate();
  for (const auto& p : params) {
    first_.emplace_back(p.numel(), 0.0f);
    second_.emplace_back(p.numel(), 0.0f);
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.first_.size()) {
    throw std::invalid_argument("adam_step: parameter count does not match optimizer state");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    if (params[i].numel() != state.first_[i].size()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                  " does not match its moment buffers");
    }
  }

  const AdamConfig& c = state.config_;
  state.step_count_ += 1;
  const auto t = static_cast<float>(state.step_count_);
  const float correction1 = 1.0f - std::pow(c.beta1, t);
  const float correction2 = 1.0f - std::pow(c.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].mutable_data();
    const auto grad = params[i].grad();
    auto& m = state.first_[i];
    auto& v = state.second_[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const float g = grad[j];
      m[j] = c.beta1 * m[j] + (1.0f - c.beta1) * g;
      v[j] = c.beta2 * v[j] + (1.0f - c.beta2) * g * g;
      const float m_hat = m[j] / correction1;
      const float v_hat = v[j] / correction2;
      value[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace candid
