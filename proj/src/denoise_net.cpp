#include "candid/denoise_net.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <stdexcept>

#include "candid/ops.hpp"
#include "candid/rng.hpp"

namespace candid {

void ArchConfig::validate() const {
  if (channels != 1 && channels != 3) throw std::invalid_argument("architecture: channels must be 1 or 3");
  if (burst_size < 1) throw std::invalid_argument("architecture: burst_size must be >= 1");
  if (feature_channels < 1 || feature_hidden < 1 || kernel_hidden < 1 || fusion_hidden < 1) {
    throw std::invalid_argument("architecture: layer widths must be positive");
  }
}

Conv2dLayer::Conv2dLayer(std::string name, int in_channels, int out_channels, int kernel_size)
    : name_(std::move(name)),
      weight_(Tensor::zeros({static_cast<std::size_t>(out_channels), static_cast<std::size_t>(in_channels),
                             static_cast<std::size_t>(kernel_size), static_cast<std::size_t>(kernel_size)},
                            true)),
      bias_(Tensor::zeros({static_cast<std::size_t>(out_channels)}, true)) {}

Tensor Conv2dLayer::operator()(const Tensor& input) const {
  return conv2d(input, weight_, bias_, Padding::Same);
}

void Conv2dLayer::init_he_uniform(std::uint64_t seed) {
  const auto fan_in = static_cast<float>(weight_.dim(1) * weight_.dim(2) * weight_.dim(3));
  const float bound = std::sqrt(6.0f / fan_in);
  Rng rng(seed);
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (auto& w : weight_.mutable_data()) w = dist(rng);
  std::fill(bias_.mutable_data().begin(), bias_.mutable_data().end(), 0.0f);
}

void Conv2dLayer::init_zero() {
  std::fill(weight_.mutable_data().begin(), weight_.mutable_data().end(), 0.0f);
  std::fill(bias_.mutable_data().begin(), bias_.mutable_data().end(), 0.0f);
}

Tensor noise_level_map(const Image& frame, const NoiseParams& params) {
  const int h = frame.height(), w = frame.width(), c = frame.channels();
  std::vector<float> level(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double mean = 0.0;
      for (int k = 0; k < c; ++k) mean += frame.at(k, y, x);
      mean /= c;
      level[static_cast<std::size_t>(y) * w + x] =
          static_cast<float>(std::sqrt(std::max(0.0, params.variance(mean))));
    }
  }
  return Tensor::from_data({1, static_cast<std::size_t>(h), static_cast<std::size_t>(w)}, std::move(level));
}

Tensor stack_images(std::span<const Image> frames) {
  if (frames.empty()) throw std::invalid_argument("stack_images: no frames");
  std::vector<float> data;
  data.reserve(frames.size() * frames[0].size());
  for (const auto& f : frames) {
    if (!f.same_dims(frames[0])) throw std::invalid_argument("stack_images: frame dimensions differ");
    data.insert(data.end(), f.data().begin(), f.data().end());
  }
  return Tensor::from_data({frames.size(), static_cast<std::size_t>(frames[0].channels()),
                            static_cast<std::size_t>(frames[0].height()),
                            static_cast<std::size_t>(frames[0].width())},
                           std::move(data));
}

Tensor apply_kernels(const Tensor& images, const Tensor& kernels) {
  if (images.rank() != 4 || kernels.rank() != 5) {
    throw std::invalid_argument("apply_kernels: expected images [N,C,H,W] and kernels [N,H,W,k,k]");
  }
  const std::size_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  const std::size_t k = kernels.dim(3);
  if (kernels.dim(0) != n || kernels.dim(1) != h || kernels.dim(2) != w || kernels.dim(4) != k ||
      k % 2 == 0) {
    throw std::invalid_argument("apply_kernels: kernel volume " + to_string(kernels.shape()) +
                                " does not match images " + to_string(images.shape()));
  }
  const int r = static_cast<int>(k / 2);
  const int hi = static_cast<int>(h), wi = static_cast<int>(w);
  const std::size_t taps = k * k;
  const std::size_t plane = h * w;

  // Source offset within a plane of every tap of every pixel.
  std::vector<std::uint32_t> source(plane * taps);
  for (int y = 0; y < hi; ++y) {
    for (int x = 0; x < wi; ++x) {
      std::uint32_t* s = source.data() + (static_cast<std::size_t>(y) * w + x) * taps;
      for (int i = -r; i <= r; ++i) {
        for (int j = -r; j <= r; ++j) {
          *s++ = static_cast<std::uint32_t>(std::clamp(y + i, 0, hi - 1) * wi + std::clamp(x + j, 0, wi - 1));
        }
      }
    }
  }

  const auto img = images.data();
  const auto ker = kernels.data();
  std::vector<float> out(n * c * plane);
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* src = img.data() + (f * c + ch) * plane;
      float* dst = out.data() + (f * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const float* kp = ker.data() + (f * plane + p) * taps;
        const std::uint32_t* sp = source.data() + p * taps;
        double acc = 0.0;
        for (std::size_t t = 0; t < taps; ++t) acc += static_cast<double>(kp[t]) * src[sp[t]];
        dst[p] = static_cast<float>(acc);
      }
    }
  }

  return detail::make_result(images.shape(), std::move(out), {images, kernels},
                             [source = std::move(source), n, c, plane, taps](detail::Node& self) {
    detail::Node* img_node = self.inputs[0].get();
    detail::Node* ker_node = self.inputs[1].get();
    const auto& img = img_node->value;
    const auto& ker = ker_node->value;
    if (ker_node->requires_grad) {
      auto gk = ker_node->grad_buffer();
      for (std::size_t f = 0; f < n; ++f) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const float* src = img.data() + (f * c + ch) * plane;
          const float* g = self.grad.data() + (f * c + ch) * plane;
          for (std::size_t p = 0; p < plane; ++p) {
            float* kg = gk.data() + (f * plane + p) * taps;
            const std::uint32_t* sp = source.data() + p * taps;
            for (std::size_t t = 0; t < taps; ++t) kg[t] += g[p] * src[sp[t]];
          }
        }
      }
    }
    if (img_node->requires_grad) {
      auto gi = img_node->grad_buffer();
      for (std::size_t f = 0; f < n; ++f) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          float* dst = gi.data() + (f * c + ch) * plane;
          const float* g = self.grad.data() + (f * c + ch) * plane;
          for (std::size_t p = 0; p < plane; ++p) {
            const float* kp = ker.data() + (f * plane + p) * taps;
            const std::uint32_t* sp = source.data() + p * taps;
            for (std::size_t t = 0; t < taps; ++t) dst[sp[t]] += kp[t] * g[p];
          }
        }
      }
    }
  }, "apply_kernels");
}

double kernel_normalization_error(const Tensor& kernels) {
  const std::size_t taps = kernels.dim(3) * kernels.dim(4);
  const auto v = kernels.data();
  double worst = 0.0;
  for (std::size_t base = 0; base < v.size(); base += taps) {
    double total = 0.0;
    for (std::size_t t = 0; t < taps; ++t) {
      if (v[base + t] < 0.0f) return std::numeric_limits<double>::infinity();
      total += v[base + t];
    }
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return worst;
}

double fusion_normalization_error(const Tensor& weights) {
  const std::size_t m = weights.dim(0);
  const std::size_t inner = weights.numel() / m;
  const auto v = weights.data();
  double worst = 0.0;
  for (std::size_t i = 0; i < inner; ++i) {
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) total += v[k * inner + i];
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return worst;
}

namespace {

std::vector<Conv2dLayer> make_stack(const std::string& prefix, const std::vector<int>& widths) {
  std::vector<Conv2dLayer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.emplace_back(prefix + ".conv" + std::to_string(i), widths[i], widths[i + 1], 3);
  }
  return layers;
}

// ReLU between layers, linear output.
Tensor run_stack(const std::vector<Conv2dLayer>& layers, Tensor x) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](x);
    if (i + 1 < layers.size()) x = relu(x);
  }
  return x;
}

// [N, taps, H, W] logits -> [N, H, W, k, k] softmax-normalized kernels.
Tensor to_kernel_volume(const Tensor& logits, std::size_t k) {
  const std::size_t n = logits.dim(0), h = logits.dim(2), w = logits.dim(3);
  Tensor t = permute(logits, {0, 2, 3, 1});
  t = softmax(t, 3);
  return reshape(t, {n, h, w, k, k});
}

}  // namespace

DenoiseNet::DenoiseNet(ArchConfig config, std::uint64_t seed, FinalLayerInit final_init)
    : config_(config) {
  config_.validate();
  const int c = config_.channels, f = config_.feature_channels, n = config_.burst_size;
  const int s = config_.stream_count();
  features_ = make_stack("features", {c + 1, config_.feature_hidden, config_.feature_hidden, f});
  if (config_.use_adaptive_filter) {
    kernels_ = make_stack("kernels", {n * f, config_.kernel_hidden, config_.kernel_hidden,
                                      config_.kernel_hidden, n * kKernelTaps});
  }
  fusion_ = make_stack("fusion", {s * n * f + s * n * c, config_.fusion_hidden, config_.fusion_hidden,
                                  config_.fusion_hidden, s * n * c});

  for (auto* stack : {&features_, &kernels_, &fusion_}) {
    for (std::size_t i = 0; i < stack->size(); ++i) {
      auto& layer = (*stack)[i];
      const bool final_layer = i + 1 == stack->size() && stack != &features_;
      if (final_layer && final_init == FinalLayerInit::Zero) {
        layer.init_zero();
      } else {
        layer.init_he_uniform(derive_seed(seed, hash_name(layer.name())));
      }
    }
  }
}

Tensor DenoiseNet::extract_features(const Image& frame, const NoiseParams& params) const {
  if (frame.channels() != config_.channels) {
    throw std::invalid_argument("extract_features: model expects " + std::to_string(config_.channels) +
                                " channels, frame has " + std::to_string(frame.channels()));
  }
  const Tensor parts[] = {to_tensor(frame), noise_level_map(frame, params)};
  return run_stack(features_, concat(parts, 0));
}

KernelVolumes DenoiseNet::predict_kernels(std::span<const Tensor> aligned_features) const {
  if (!config_.use_adaptive_filter) throw std::logic_error("predict_kernels: adaptive filtering disabled");
  const auto n = static_cast<std::size_t>(config_.burst_size);
  if (aligned_features.size() != n) {
    throw std::invalid_argument("predict_kernels: expected " + std::to_string(n) + " feature stacks");
  }
  for (const auto& f : aligned_features) {
    if (f.shape() != aligned_features[0].shape()) {
      throw std::invalid_argument("predict_kernels: inconsistent feature dimensions");
    }
  }
  const std::size_t h = aligned_features[0].dim(1), w = aligned_features[0].dim(2);
  Tensor logits = run_stack(kernels_, concat(aligned_features, 0));
  logits = reshape(logits, {n, static_cast<std::size_t>(kKernelTaps), h, w});
  KernelVolumes out;
  out.k3 = to_kernel_volume(slice(logits, 1, 0, 9), 3);
  out.k5 = to_kernel_volume(slice(logits, 1, 9, kKernelTaps), 5);
  return out;
}

FusionResult DenoiseNet::fuse(const Tensor& filtered, std::span<const Tensor> aligned_features) const {
  const auto m = static_cast<std::size_t>(config_.fused_images());
  const auto c = static_cast<std::size_t>(config_.channels);
  if (filtered.rank() != 4 || filtered.dim(0) != m || filtered.dim(1) != c) {
    throw std::invalid_argument("fuse: expected filtered images [" + std::to_string(m) + ", " +
                                std::to_string(c) + ", H, W], got " + to_string(filtered.shape()));
  }
  if (aligned_features.size() != m) {
    throw std::invalid_argument("fuse: expected " + std::to_string(m) + " feature stacks");
  }
  const std::size_t h = filtered.dim(2), w = filtered.dim(3);
  std::vector<Tensor> inputs(aligned_features.begin(), aligned_features.end());
  inputs.push_back(reshape(filtered, {m * c, h, w}));
  Tensor logits = run_stack(fusion_, concat(inputs, 0));
  FusionResult out;
  out.weights = softmax(reshape(logits, {m, c, h, w}), 0);
  out.image = sum_axis(mul(out.weights, filtered), 0);
  return out;
}

ForwardTrace DenoiseNet::forward(const Burst& burst, const FrozenStages& stages) const {
  burst.validate();
  if (static_cast<int>(burst.size()) != config_.burst_size) {
    throw std::invalid_argument("forward: model expects bursts of " + std::to_string(config_.burst_size) +
                                " frames, got " + std::to_string(burst.size()));
  }
  std::vector<Burst> streams;
  if (config_.use_prefilter) {
    StreamSet set = make_streams(burst, stages.prefilter);
    streams.assign(std::make_move_iterator(set.streams.begin()), std::make_move_iterator(set.streams.end()));
  } else {
    streams.push_back(burst);
  }

  const IdentityFlow identity;
  const FlowEstimator& flow = config_.use_align ? stages.flow : identity;
  ForwardTrace trace;
  std::vector<Tensor> all_features;
  std::vector<Tensor> all_filtered;
  for (const Burst& stream : streams) {
    std::vector<Tensor> features;
    for (const Image& frame : stream.frames) features.push_back(extract_features(frame, burst.params));
    AlignedStream aligned = align_stream(stream, std::move(features), flow);
    Tensor images = stack_images(aligned.images);
    Tensor filtered = images;
    if (config_.use_adaptive_filter) {
      KernelVolumes kernels = predict_kernels(aligned.features);
      filtered = scale(add(apply_kernels(images, kernels.k3), apply_kernels(images, kernels.k5)), 0.5f);
      assert(kernel_normalization_error(kernels.k3) < 1e-5);
      assert(kernel_normalization_error(kernels.k5) < 1e-5);
      trace.kernels.push_back(std::move(kernels));
    }
    all_features.insert(all_features.end(), aligned.features.begin(), aligned.features.end());
    all_filtered.push_back(filtered);
    trace.filtered.push_back(filtered);
    trace.aligned.push_back(std::move(aligned));
  }
  FusionResult fused = fuse(concat(all_filtered, 0), all_features);
  assert(fusion_normalization_error(fused.weights) < 1e-5);
  trace.output = fused.image;
  trace.fusion_weights = fused.weights;
  return trace;
}

ForwardTrace DenoiseNet::forward(const Burst& burst) const {
  const BilateralDenoiser prefilter;
  const LucasKanadeFlow flow;
  return forward(burst, FrozenStages{prefilter, flow});
}

std::vector<Tensor> DenoiseNet::parameters() const {
  std::vector<Tensor> params;
  for (const auto* stack : {&features_, &kernels_, &fusion_}) {
    for (const auto& layer : *stack) {
      params.push_back(layer.weight());
      params.push_back(layer.bias());
    }
  }
  return params;
}

std::vector<NamedTensor> DenoiseNet::state() const {
  std::vector<NamedTensor> out;
  for (const auto* stack : {&features_, &kernels_, &fusion_}) {
    for (const auto& layer : *stack) {
      for (const auto& [suffix, t] : {std::pair{".w", &layer.weight()}, std::pair{".b", &layer.bias()}}) {
        out.push_back({layer.name() + suffix, t->shape(), std::vector<float>(t->data().begin(), t->data().end())});
      }
    }
  }
  return out;
}

void DenoiseNet::load_state(std::span<const NamedTensor> records) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& r : records) by_name[r.name] = &r;
  const auto expected = state();
  if (records.size() != expected.size()) {
    throw std::runtime_error("checkpoint/architecture mismatch: checkpoint has " +
                             std::to_string(records.size()) + " tensors, model expects " +
                             std::to_string(expected.size()));
  }
  for (const auto& e : expected) {
    auto it = by_name.find(e.name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint/architecture mismatch: missing " + e.name);
    if (it->second->shape != e.shape) {
      throw std::runtime_error("checkpoint/architecture mismatch: " + e.name + " is " +
                               to_string(it->second->shape) + ", model expects " + to_string(e.shape));
    }
  }
  for (auto* stack : {&features_, &kernels_, &fusion_}) {
    for (auto& layer : *stack) {
      const auto& w = by_name.at(layer.name() + ".w")->data;
      const auto& b = by_name.at(layer.name() + ".b")->data;
      detail::check_finite(w, "checkpoint");
      detail::check_finite(b, "checkpoint");
      std::copy(w.begin(), w.end(), layer.weight().mutable_data().begin());
      std::copy(b.begin(), b.end(), layer.bias().mutable_data().begin());
    }
  }
}

ArchConfig infer_arch(std::span<const NamedTensor> records, int burst_size, ArchConfig base) {
  std::map<std::string, Shape> shapes;
  for (const auto& r : records) shapes[r.name] = r.shape;
  auto get = [&](const std::string& name) -> const Shape& {
    auto it = shapes.find(name);
    if (it == shapes.end() || it->second.size() != 4) {
      throw std::runtime_error("checkpoint/architecture mismatch: missing or malformed " + name);
    }
    return it->second;
  };
  ArchConfig arch = base;
  const Shape& f0 = get("features.conv0.w");
  arch.feature_hidden = static_cast<int>(f0[0]);
  arch.channels = static_cast<int>(f0[1]) - 1;
  arch.feature_channels = static_cast<int>(get("features.conv2.w")[0]);
  arch.burst_size = burst_size;
  arch.use_adaptive_filter = shapes.count("kernels.conv0.w") > 0;
  if (arch.use_adaptive_filter) {
    const Shape& k0 = get("kernels.conv0.w");
    arch.kernel_hidden = static_cast<int>(k0[0]);
    arch.burst_size = static_cast<int>(k0[1]) / arch.feature_channels;
  }
  const Shape& u0 = get("fusion.conv0.w");
  arch.fusion_hidden = static_cast<int>(u0[0]);
  const int fused_channels = static_cast<int>(get("fusion.conv3.w")[0]);
  const int streams = fused_channels / (arch.burst_size * arch.channels);
  if (streams != 1 && streams != static_cast<int>(kStreamCount)) {
    throw std::runtime_error("checkpoint/architecture mismatch: cannot infer stream count for burst size " +
                             std::to_string(arch.burst_size));
  }
  arch.use_prefilter = streams == static_cast<int>(kStreamCount);
  arch.validate();
  return arch;
}

}  // namespace candid
