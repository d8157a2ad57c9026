#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "candid/denoise_net.hpp"
#include "candid/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/scenes.hpp"

namespace candid {
namespace {

ArchConfig small_arch(int n = 2, int channels = 1) {
  return ArchConfig{.channels = channels, .burst_size = n, .feature_channels = 4, .feature_hidden = 6,
                    .kernel_hidden = 8, .fusion_hidden = 8};
}

Burst make_burst(int n, int size, int channels, std::uint64_t seed, double max_shift = 2.0) {
  const Image gt = testing::make_scene(size, size, channels, seed);
  Rng rng(seed);
  return synthesize_burst(gt, n, max_shift, sample_noise_params(rng, NoiseLevel::Lvl1), rng).burst;
}

TEST(NoiseLevelMap, MatchesFormulaAndVanishesWithoutNoise) {
  Image frame(2, 2, 3);
  frame.at(0, 0, 0) = 0.3f, frame.at(1, 0, 0) = 0.6f, frame.at(2, 0, 0) = 0.9f;
  const NoiseParams p{0.01, 0.1};
  const Tensor map = noise_level_map(frame, p);
  EXPECT_EQ(map.shape(), (Shape{1, 2, 2}));
  EXPECT_NEAR(map.data()[0], std::sqrt(0.01 * 0.01 + 0.1 * 0.1 * 0.6), 1e-7);
  EXPECT_NEAR(map.data()[1], 0.01, 1e-7);
  const Tensor silent = noise_level_map(frame, NoiseParams{});
  for (float v : silent.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Features, ShapeFollowsInputSize) {
  const DenoiseNet net(small_arch(2, 3), 1);
  for (auto [h, w] : {std::pair{5, 7}, {16, 9}, {1, 1}}) {
    const Tensor f = net.extract_features(Image(h, w, 3, 0.5f), NoiseParams{0.01, 0.01});
    EXPECT_EQ(f.shape(), (Shape{4, static_cast<std::size_t>(h), static_cast<std::size_t>(w)}));
  }
  EXPECT_THROW(net.extract_features(Image(4, 4, 1), NoiseParams{}), std::invalid_argument);
}

TEST(Features, SharedAcrossFramesAndStreams) {
  const DenoiseNet net(small_arch(), 2);
  const Image frame = testing::make_scene(12, 12, 1, 3);
  const Tensor a = net.extract_features(frame, NoiseParams{0.01, 0.02});
  const Tensor b = net.extract_features(frame, NoiseParams{0.01, 0.02});
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Kernels, ShapesAndUniformStart) {
  const DenoiseNet net(small_arch(3), 4);
  std::vector<Tensor> feats;
  for (int i = 0; i < 3; ++i) feats.push_back(testing::random_tensor({4, 6, 5}, 10 + i, -1, 1, false));
  const KernelVolumes kv = net.predict_kernels(feats);
  EXPECT_EQ(kv.k3.shape(), (Shape{3, 6, 5, 3, 3}));
  EXPECT_EQ(kv.k5.shape(), (Shape{3, 6, 5, 5, 5}));
  for (float v : kv.k3.data()) EXPECT_NEAR(v, 1.0f / 9.0f, 1e-7);
  for (float v : kv.k5.data()) EXPECT_NEAR(v, 1.0f / 25.0f, 1e-7);
  feats.pop_back();
  EXPECT_THROW(net.predict_kernels(feats), std::invalid_argument);
  feats.push_back(Tensor::zeros({4, 6, 4}));
  EXPECT_THROW(net.predict_kernels(feats), std::invalid_argument);
}

TEST(Kernels, NormalizedAfterRandomInit) {
  const DenoiseNet net(small_arch(2), 5, FinalLayerInit::Random);
  std::vector<Tensor> feats{testing::random_tensor({4, 7, 7}, 1, -3, 3, false),
                            testing::random_tensor({4, 7, 7}, 2, -3, 3, false)};
  const KernelVolumes kv = net.predict_kernels(feats);
  EXPECT_LT(kernel_normalization_error(kv.k3), 1e-5);
  EXPECT_LT(kernel_normalization_error(kv.k5), 1e-5);
  for (float v : kv.k5.data()) EXPECT_GE(v, 0.0f);
}

TEST(ApplyKernels, ConstantImageStaysConstant) {
  Rng rng(6);
  const Tensor img = Tensor::from_data({2, 3, 5, 6}, std::vector<float>(180, 0.42f));
  for (std::size_t k : {3u, 5u}) {
    const Tensor out = apply_kernels(img, testing::random_kernels(2, 5, 6, k, rng));
    for (float v : out.data()) EXPECT_NEAR(v, 0.42f, 1e-6);
  }
}

TEST(ApplyKernels, CenterTapIsIdentity) {
  const Tensor img = testing::random_tensor({2, 1, 4, 5}, 7, 0, 1, false);
  std::vector<float> k(2 * 4 * 5 * 25, 0.0f);
  for (std::size_t p = 0; p < 40; ++p) k[p * 25 + 12] = 1.0f;
  const Tensor out = apply_kernels(img, Tensor::from_data({2, 4, 5, 5, 5}, std::move(k)));
  EXPECT_TRUE(std::equal(out.data().begin(), out.data().end(), img.data().begin()));
}

TEST(ApplyKernels, MatchesLoopOracle) {
  Rng rng(8);
  std::uniform_int_distribution<int> dim(1, 7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = dim(rng) % 3 + 1, c = trial % 2 ? 3 : 1, h = dim(rng), w = dim(rng);
    const std::size_t k = trial % 3 ? 3 : 5;
    const Tensor img = testing::random_tensor({n, c, h, w}, 500 + trial, 0, 1, false);
    const Tensor ker = testing::random_kernels(n, h, w, k, rng);
    const Tensor out = apply_kernels(img, ker);
    const auto ref = testing::apply_kernels_oracle(img, ker);
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(out.data()[i], ref[i], 1e-6) << trial;
  }
}

TEST(ApplyKernels, OutputInsideNeighbourhoodEnvelope) {
  Rng rng(9);
  const Tensor img = testing::random_tensor({1, 1, 6, 6}, 9, 0, 1, false);
  const Tensor out = apply_kernels(img, testing::random_kernels(1, 6, 6, 3, rng));
  const float lo = *std::min_element(img.data().begin(), img.data().end());
  const float hi = *std::max_element(img.data().begin(), img.data().end());
  for (float v : out.data()) {
    EXPECT_GE(v, lo - 1e-6f);
    EXPECT_LE(v, hi + 1e-6f);
  }
}

TEST(ApplyKernels, Gradients) {
  Rng rng(10);
  for (std::size_t k : {3u, 5u}) {
    Tensor img = testing::random_tensor({2, 3, 4, 5}, 11);
    Tensor ker = testing::random_tensor({2, 4, 5, k, k}, 12);
    const auto report = testing::gradcheck([&] { return apply_kernels(img, ker); }, {{"images", img}, {"kernels", ker}});
    EXPECT_LT(report.worst_error, 1e-3) << report.worst_input;
  }
  EXPECT_THROW(apply_kernels(Tensor::zeros({1, 1, 4, 4}), Tensor::zeros({1, 4, 4, 4, 4})), std::invalid_argument);
  EXPECT_THROW(apply_kernels(Tensor::zeros({2, 1, 4, 4}), testing::random_kernels(1, 4, 4, 3, rng)), std::invalid_argument);
}

struct FuseInputs {
  Tensor filtered;
  std::vector<Tensor> features;
};

FuseInputs fuse_inputs(const ArchConfig& arch, std::size_t h, std::size_t w, std::uint64_t seed) {
  const auto m = static_cast<std::size_t>(arch.fused_images());
  FuseInputs in{testing::random_tensor({m, static_cast<std::size_t>(arch.channels), h, w}, seed, 0, 1, false), {}};
  for (std::size_t i = 0; i < m; ++i) {
    in.features.push_back(testing::random_tensor({static_cast<std::size_t>(arch.feature_channels), h, w},
                                                 seed + 1 + i, -1, 1, false));
  }
  return in;
}

TEST(Fuse, SingleCandidatePassesThrough) {
  ArchConfig arch = small_arch(1);
  arch.use_prefilter = false;
  const DenoiseNet net(arch, 13, FinalLayerInit::Random);
  const FuseInputs in = fuse_inputs(arch, 5, 5, 14);
  const FusionResult r = net.fuse(in.filtered, in.features);
  EXPECT_TRUE(std::equal(r.image.data().begin(), r.image.data().end(), in.filtered.data().begin()));
}

TEST(Fuse, IdenticalCandidatesReproduceInput) {
  const ArchConfig arch = small_arch(2, 3);
  const DenoiseNet net(arch, 15, FinalLayerInit::Random);
  FuseInputs in = fuse_inputs(arch, 4, 6, 16);
  const Tensor one = testing::random_tensor({1, 3, 4, 6}, 17, 0, 1, false);
  in.filtered = concat(std::vector<Tensor>(6, one), 0);
  const FusionResult r = net.fuse(in.filtered, in.features);
  for (std::size_t i = 0; i < one.numel(); ++i) EXPECT_NEAR(r.image.data()[i], one.data()[i], 1e-6);
}

TEST(Fuse, ConvexCombinationPerPixelAndChannel) {
  const ArchConfig arch = small_arch(2, 3);
  const DenoiseNet net(arch, 18, FinalLayerInit::Random);
  const FuseInputs in = fuse_inputs(arch, 5, 4, 19);
  const FusionResult r = net.fuse(in.filtered, in.features);
  EXPECT_LT(fusion_normalization_error(r.weights), 1e-5);
  const std::size_t m = 6, plane = 3 * 5 * 4;
  for (std::size_t p = 0; p < plane; ++p) {
    float lo = 1e9f, hi = -1e9f;
    for (std::size_t i = 0; i < m; ++i) {
      lo = std::min(lo, in.filtered.data()[i * plane + p]);
      hi = std::max(hi, in.filtered.data()[i * plane + p]);
    }
    EXPECT_GE(r.image.data()[p], lo - 1e-6f);
    EXPECT_LE(r.image.data()[p], hi + 1e-6f);
  }
  EXPECT_THROW(net.fuse(in.filtered, std::span(in.features).first(3)), std::invalid_argument);
}

TEST(Forward, ShapeDeterminismAndNormalization) {
  const ArchConfig arch = small_arch(3);
  const DenoiseNet net(arch, 20, FinalLayerInit::Random);
  const Burst burst = make_burst(3, 12, 1, 21);
  const ForwardTrace a = net.forward(burst), b = net.forward(burst);
  EXPECT_EQ(a.output.shape(), (Shape{1, 12, 12}));
  EXPECT_TRUE(std::equal(a.output.data().begin(), a.output.data().end(), b.output.data().begin()));
  EXPECT_EQ(a.fusion_weights.shape(), (Shape{9, 1, 12, 12}));
  ASSERT_EQ(a.kernels.size(), 3u);
  for (const auto& kv : a.kernels) {
    EXPECT_LT(kernel_normalization_error(kv.k3), 1e-5);
    EXPECT_LT(kernel_normalization_error(kv.k5), 1e-5);
  }
  EXPECT_LT(fusion_normalization_error(a.fusion_weights), 1e-5);
  EXPECT_THROW(net.forward(make_burst(2, 12, 1, 22)), std::invalid_argument);
}

TEST(Forward, UniformStartAveragesFilteredFrames) {
  const DenoiseNet net(small_arch(2), 23);
  const ForwardTrace t = net.forward(make_burst(2, 10, 1, 24));
  for (float w : t.fusion_weights.data()) EXPECT_NEAR(w, 1.0f / 6.0f, 1e-7);
}

TEST(Forward, AblationVariantsChangeCandidateCount) {
  ArchConfig arch = small_arch(2);
  arch.use_prefilter = false;
  EXPECT_EQ(DenoiseNet(arch, 1).forward(make_burst(2, 10, 1, 25)).fusion_weights.dim(0), 2u);
  arch = small_arch(2);
  arch.use_adaptive_filter = false;
  const ForwardTrace t = DenoiseNet(arch, 1).forward(make_burst(2, 10, 1, 25));
  EXPECT_TRUE(t.kernels.empty());
  EXPECT_EQ(t.fusion_weights.dim(0), 6u);
  arch = small_arch(2);
  arch.use_align = false;
  const ForwardTrace u = DenoiseNet(arch, 1).forward(make_burst(2, 10, 1, 25));
  for (const auto& s : u.aligned) EXPECT_EQ(s.flows[1], FlowField(10, 10));
}

// Swapping two secondary frames (and their features) swaps their filtered
// outputs when the kernels are shared through a fixed volume.
TEST(Forward, PerFramePathIsPermutationEquivariant) {
  Rng rng(26);
  const Tensor frames = testing::random_tensor({3, 1, 6, 6}, 27, 0, 1, false);
  const Tensor kernels = testing::random_kernels(3, 6, 6, 3, rng);
  const std::vector<std::size_t> perm{0, 2, 1};
  auto pick = [&](const Tensor& t) {
    std::vector<Tensor> parts;
    for (std::size_t i : perm) parts.push_back(slice(t, 0, i, i + 1));
    return concat(parts, 0);
  };
  const Tensor a = apply_kernels(frames, kernels);
  const Tensor b = apply_kernels(pick(frames), pick(kernels));
  const Tensor pa = pick(a);
  EXPECT_TRUE(std::equal(b.data().begin(), b.data().end(), pa.data().begin()));
}

TEST(State, NamesRoundTripAndMismatch) {
  const ArchConfig arch = small_arch(2);
  const DenoiseNet net(arch, 28, FinalLayerInit::Random);
  const auto state = net.state();
  std::vector<std::string> names;
  for (const auto& r : state) names.push_back(r.name);
  for (const char* expected : {"features.conv0.w", "features.conv2.b", "kernels.conv3.b", "fusion.conv2.w",
                               "fusion.conv3.w"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), expected), names.end()) << expected;
  }
  EXPECT_EQ(state.size(), net.parameters().size());

  DenoiseNet other(arch, 29, FinalLayerInit::Random);
  other.load_state(state);
  const Burst burst = make_burst(2, 10, 1, 30);
  const Tensor a = net.forward(burst).output, b = other.forward(burst).output;
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));

  const ArchConfig inferred = infer_arch(state, 2);
  EXPECT_EQ(inferred.feature_channels, 4);
  EXPECT_EQ(inferred.feature_hidden, 6);
  EXPECT_EQ(inferred.kernel_hidden, 8);
  EXPECT_EQ(inferred.fusion_hidden, 8);
  EXPECT_TRUE(inferred.use_prefilter);
  EXPECT_TRUE(inferred.use_adaptive_filter);

  DenoiseNet wider(ArchConfig{.burst_size = 2}, 1);
  EXPECT_THROW(wider.load_state(state), std::runtime_error);
  auto missing = state;
  missing.pop_back();
  EXPECT_THROW(other.load_state(missing), std::runtime_error);
}

TEST(State, InfersAblatedArchitectures) {
  ArchConfig arch = small_arch(4);
  arch.use_prefilter = false;
  arch.use_adaptive_filter = false;
  const auto inferred = infer_arch(DenoiseNet(arch, 1).state(), 4);
  EXPECT_FALSE(inferred.use_prefilter);
  EXPECT_FALSE(inferred.use_adaptive_filter);
  EXPECT_EQ(inferred.burst_size, 4);
}

// Checked at a generic point: random final layers and nonzero biases, with
// high-contrast frames so every stage carries a measurable gradient.
// Coordinates whose step flips a ReLU are excluded (non-differentiable
// segment); the rest are compared normwise over all weights at once.
TEST(Gradients, FullMicroPipeline) {
  const ArchConfig arch{.channels = 1, .burst_size = 2, .feature_channels = 2, .feature_hidden = 3,
                        .kernel_hidden = 3, .fusion_hidden = 3};
  const DenoiseNet net(arch, 31, FinalLayerInit::Random);
  auto params = net.parameters();
  const auto names = net.state();
  Rng rng(32);
  std::uniform_real_distribution<float> bias(-0.2f, 0.2f), pixel(0.0f, 1.0f);
  std::vector<testing::NamedInput> inputs;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (names[i].name.ends_with(".b")) {
      for (float& v : params[i].mutable_data()) v = bias(rng);
    }
    inputs.push_back({names[i].name, params[i]});
  }
  Burst burst;
  burst.params = NoiseParams{0.01, 0.01};
  for (int i = 0; i < 2; ++i) {
    Image frame(8, 8, 1);
    for (float& v : frame.data()) v = pixel(rng);
    burst.frames.push_back(frame);
  }
  const auto report = testing::gradcheck([&] { return net.forward(burst).output; }, inputs, 33, 5e-3, true);
  EXPECT_LT(report.combined_error, 1e-2);
  EXPECT_LT(static_cast<double>(report.skipped), 0.3 * static_cast<double>(report.checked + report.skipped));
  EXPECT_GT(report.checked, 2000u);
}

}  // namespace
}  // namespace candid
