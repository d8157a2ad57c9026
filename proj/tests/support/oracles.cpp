#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace candid::testing {

std::vector<double> conv_oracle(const Tensor& in, const Tensor& w, const Tensor& b, bool same) {
  const int cin = static_cast<int>(in.dim(0)), h = static_cast<int>(in.dim(1)), wd = static_cast<int>(in.dim(2));
  const int cout = static_cast<int>(w.dim(0)), k = static_cast<int>(w.dim(2));
  const int pad = same ? k / 2 : 0;
  const int oh = same ? h : h - k + 1, ow = same ? wd : wd - k + 1;
  std::vector<double> out(static_cast<std::size_t>(cout * oh * ow));
  const auto x = in.data(), wt = w.data(), bias = b.data();
  for (int o = 0; o < cout; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        double acc = bias[o];
        for (int c = 0; c < cin; ++c) {
          for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
              const int sy = y + i - pad, sx = xx + j - pad;
              if (sy < 0 || sy >= h || sx < 0 || sx >= wd) continue;
              acc += static_cast<double>(wt[((o * cin + c) * k + i) * k + j]) * x[(c * h + sy) * wd + sx];
            }
          }
        }
        out[static_cast<std::size_t>((o * oh + y) * ow + xx)] = acc;
      }
    }
  }
  return out;
}

double warp_oracle(const Image& img, int c, int y, int x, float dx, float dy) {
  const float sx = static_cast<float>(x) + dx, sy = static_cast<float>(y) + dy;
  const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
  const double ax = static_cast<double>(sx) - x0, ay = static_cast<double>(sy) - y0;
  auto px = [&](int yy, int xx) {
    return static_cast<double>(img.at(c, std::clamp(yy, 0, img.height() - 1), std::clamp(xx, 0, img.width() - 1)));
  };
  return (1 - ay) * ((1 - ax) * px(y0, x0) + ax * px(y0, x0 + 1)) +
         ay * ((1 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1));
}

std::vector<double> apply_kernels_oracle(const Tensor& images, const Tensor& kernels) {
  const std::size_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  const std::size_t k = kernels.dim(3);
  const int r = static_cast<int>(k / 2);
  const auto img = images.data(), ker = kernels.data();
  std::vector<double> out(n * c * h * w);
  for (std::size_t f = 0; f < n; ++f)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (int y = 0; y < static_cast<int>(h); ++y)
        for (int x = 0; x < static_cast<int>(w); ++x) {
          double acc = 0.0;
          for (int i = -r; i <= r; ++i)
            for (int j = -r; j <= r; ++j) {
              const int sy = std::clamp(y + i, 0, static_cast<int>(h) - 1);
              const int sx = std::clamp(x + j, 0, static_cast<int>(w) - 1);
              acc += static_cast<double>(ker[(((f * h + y) * w + x) * k + (i + r)) * k + (j + r)]) *
                     img[((f * c + ch) * h + sy) * w + sx];
            }
          out[((f * c + ch) * h + y) * w + x] = acc;
        }
  return out;
}

Tensor random_kernels(std::size_t n, std::size_t h, std::size_t w, std::size_t k, Rng& rng) {
  std::uniform_real_distribution<float> u(0.01f, 1.0f);
  std::vector<float> data(n * h * w * k * k);
  for (std::size_t p = 0; p < n * h * w; ++p) {
    float s = 0.0f;
    for (std::size_t t = 0; t < k * k; ++t) s += data[p * k * k + t] = u(rng);
    for (std::size_t t = 0; t < k * k; ++t) data[p * k * k + t] /= s;
  }
  return Tensor::from_data({n, h, w, k, k}, std::move(data));
}

Image random_image(int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(h, w, c);
  for (float& v : img.data()) v = u(rng);
  return img;
}

}  // namespace candid::testing
