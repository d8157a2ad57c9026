#pragma once

// Brute-force loop references for the vectorized kernels, accumulated in double.

#include <cstdint>
#include <vector>

#include "candid/image.hpp"
#include "candid/rng.hpp"
#include "candid/tensor.hpp"

namespace candid::testing {

/// Six-loop cross-correlation with zero padding ("same") or none ("valid").
std::vector<double> conv_oracle(const Tensor& in, const Tensor& w, const Tensor& b, bool same);

/// Bilinear read at (x + dx, y + dy) with clamped indices.
double warp_oracle(const Image& img, int c, int y, int x, float dx, float dy);

/// Per-pixel kernels [N, H, W, k, k] over images [N, C, H, W], clamped borders.
std::vector<double> apply_kernels_oracle(const Tensor& images, const Tensor& kernels);

/// Positive kernels [N, H, W, k, k] normalized per pixel.
Tensor random_kernels(std::size_t n, std::size_t h, std::size_t w, std::size_t k, Rng& rng);

/// Uniform values in [0, 1).
Image random_image(int h, int w, int c, std::uint64_t seed);

}  // namespace candid::testing
