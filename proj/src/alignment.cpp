#include "candid/alignment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>

#include "candid/io_util.hpp"

namespace candid {

namespace fs = std::filesystem;

FlowField::FlowField(int height, int width)
    : height_(height),
      width_(width),
      dx_(static_cast<std::size_t>(height) * width, 0.0f),
      dy_(static_cast<std::size_t>(height) * width, 0.0f) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("flow field dimensions must be positive");
}

FlowField FlowField::constant(int height, int width, float dx, float dy) {
  FlowField f(height, width);
  std::fill(f.dx_.begin(), f.dx_.end(), dx);
  std::fill(f.dy_.begin(), f.dy_.end(), dy);
  return f;
}

namespace {

// Single-channel working plane for the estimator.
struct Plane {
  int h = 0, w = 0;
  std::vector<float> v;

  Plane() = default;
  Plane(int height, int width) : h(height), w(width), v(static_cast<std::size_t>(height) * width, 0.0f) {}

  float& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  float at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  float clamped(int y, int x) const { return at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); }
  float sample(float x, float y) const {
    const float fx = std::floor(x), fy = std::floor(y);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const float ax = x - fx, ay = y - fy;
    const float top = (1.0f - ax) * clamped(y0, x0) + ax * clamped(y0, x0 + 1);
    const float bottom = (1.0f - ax) * clamped(y0 + 1, x0) + ax * clamped(y0 + 1, x0 + 1);
    return (1.0f - ay) * top + ay * bottom;
  }
};

Plane luma_plane(const Image& img) {
  const Image gray = to_grayscale(img);
  Plane p(gray.height(), gray.width());
  std::copy(gray.data().begin(), gray.data().end(), p.v.begin());
  return p;
}

std::vector<float> binomial_weights(int radius) {
  std::vector<double> row{1.0};
  for (int i = 0; i < 2 * radius; ++i) {
    std::vector<double> next(row.size() + 1, 0.0);
    for (std::size_t k = 0; k < row.size(); ++k) {
      next[k] += row[k];
      next[k + 1] += row[k];
    }
    row = std::move(next);
  }
  double total = 0.0;
  for (double v : row) total += v;
  std::vector<float> out;
  for (double v : row) out.push_back(static_cast<float>(v / total));
  return out;
}

// Separable normalized binomial smoothing, clamp-to-edge.
Plane smooth(const Plane& in, const std::vector<float>& taps) {
  const int r = static_cast<int>(taps.size() / 2);
  Plane tmp(in.h, in.w), out(in.h, in.w);
  auto interior = [r](int x, int n) { return x >= r && x < n - r; };
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      float acc = 0.0f;
      if (interior(x, in.w)) {
        for (int k = -r; k <= r; ++k) acc += taps[static_cast<std::size_t>(k + r)] * in.at(y, x + k);
      } else {
        for (int k = -r; k <= r; ++k) acc += taps[static_cast<std::size_t>(k + r)] * in.clamped(y, x + k);
      }
      tmp.at(y, x) = acc;
    }
  }
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      float acc = 0.0f;
      if (interior(y, in.h)) {
        for (int k = -r; k <= r; ++k) acc += taps[static_cast<std::size_t>(k + r)] * tmp.at(y + k, x);
      } else {
        for (int k = -r; k <= r; ++k) acc += taps[static_cast<std::size_t>(k + r)] * tmp.clamped(y + k, x);
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

Plane downsample(const Plane& in, const std::vector<float>& antialias) {
  const Plane blurred = smooth(in, antialias);
  Plane out((in.h + 1) / 2, (in.w + 1) / 2);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) out.at(y, x) = blurred.at(2 * y, 2 * x);
  }
  return out;
}

void gradients(const Plane& in, Plane& gx, Plane& gy) {
  gx = Plane(in.h, in.w);
  gy = Plane(in.h, in.w);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      gx.at(y, x) = 0.5f * (in.clamped(y, x + 1) - in.clamped(y, x - 1));
      gy.at(y, x) = 0.5f * (in.clamped(y + 1, x) - in.clamped(y - 1, x));
    }
  }
}

// Coarse flow resampled to (h, w) with vectors doubled.
void upsample_flow(const Plane& cx, const Plane& cy, int h, int w, Plane& fx, Plane& fy) {
  fx = Plane(h, w);
  fy = Plane(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float sx = (static_cast<float>(x) + 0.5f) * 0.5f - 0.5f;
      const float sy = (static_cast<float>(y) + 0.5f) * 0.5f - 0.5f;
      fx.at(y, x) = 2.0f * cx.sample(sx, sy);
      fy.at(y, x) = 2.0f * cy.sample(sx, sy);
    }
  }
}

void refine_level(const Plane& ref, const Plane& sec, const LucasKanadeParams& params,
                  const std::vector<float>& window, Plane& fx, Plane& fy) {
  Plane gx1, gy1, gx2, gy2;
  gradients(ref, gx1, gy1);
  gradients(sec, gx2, gy2);
  const int h = ref.h, w = ref.w;
  Plane sxx(h, w), sxy(h, w), syy(h, w), sxt(h, w), syt(h, w);
  for (int iter = 0; iter < params.iterations; ++iter) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float px = static_cast<float>(x) + fx.at(y, x);
        const float py = static_cast<float>(y) + fy.at(y, x);
        const float gx = 0.5f * (gx1.at(y, x) + gx2.sample(px, py));
        const float gy = 0.5f * (gy1.at(y, x) + gy2.sample(px, py));
        const float it = sec.sample(px, py) - ref.at(y, x);
        sxx.at(y, x) = gx * gx;
        sxy.at(y, x) = gx * gy;
        syy.at(y, x) = gy * gy;
        sxt.at(y, x) = gx * it;
        syt.at(y, x) = gy * it;
      }
    }
    const Plane a = smooth(sxx, window), b = smooth(sxy, window), d = smooth(syy, window);
    const Plane bx = smooth(sxt, window), by = smooth(syt, window);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double txx = a.at(y, x), txy = b.at(y, x), tyy = d.at(y, x);
        const double trace = txx + tyy;
        const double det = txx * tyy - txy * txy;
        const double min_eig = 0.5 * (trace - std::sqrt(std::max(0.0, trace * trace - 4.0 * det)));
        if (min_eig < params.min_eigenvalue) continue;
        const double rxx = txx + params.regularization, ryy = tyy + params.regularization;
        const double rdet = rxx * ryy - txy * txy;
        double ux = -(ryy * bx.at(y, x) - txy * by.at(y, x)) / rdet;
        double uy = -(rxx * by.at(y, x) - txy * bx.at(y, x)) / rdet;
        const double norm = std::hypot(ux, uy);
        if (norm > 1.0) {
          ux /= norm;
          uy /= norm;
        }
        fx.at(y, x) += static_cast<float>(ux);
        fy.at(y, x) += static_cast<float>(uy);
      }
    }
  }
}

}  // namespace

FlowField estimate_flow(const Image& reference, const Image& secondary,
                        const LucasKanadeParams& params) {
  if (reference.height() != secondary.height() || reference.width() != secondary.width()) {
    throw std::invalid_argument("estimate_flow: frame dimensions differ");
  }
  const auto antialias = binomial_weights(2);
  const auto window = binomial_weights(params.window_radius);

  std::vector<Plane> ref_pyr{luma_plane(reference)};
  std::vector<Plane> sec_pyr{luma_plane(secondary)};
  while (static_cast<int>(ref_pyr.size()) < params.levels) {
    const Plane& last = ref_pyr.back();
    if ((last.h + 1) / 2 < params.min_level_size || (last.w + 1) / 2 < params.min_level_size) break;
    ref_pyr.push_back(downsample(last, antialias));
    sec_pyr.push_back(downsample(sec_pyr.back(), antialias));
  }

  Plane fx, fy;
  for (std::size_t level = ref_pyr.size(); level-- > 0;) {
    const Plane& ref = ref_pyr[level];
    if (fx.v.empty()) {
      fx = Plane(ref.h, ref.w);
      fy = Plane(ref.h, ref.w);
    } else {
      Plane ux, uy;
      upsample_flow(fx, fy, ref.h, ref.w, ux, uy);
      fx = std::move(ux);
      fy = std::move(uy);
    }
    refine_level(ref, sec_pyr[level], params, window, fx, fy);
  }

  FlowField flow(reference.height(), reference.width());
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      flow.dx(y, x) = fx.at(y, x);
      flow.dy(y, x) = fy.at(y, x);
    }
  }
  return flow;
}

Image warp(const Image& data, const FlowField& flow) {
  if (data.height() != flow.height() || data.width() != flow.width()) {
    throw std::invalid_argument("warp: flow dimensions do not match the image");
  }
  Image out(data.height(), data.width(), data.channels());
  for (int c = 0; c < data.channels(); ++c) {
    for (int y = 0; y < data.height(); ++y) {
      for (int x = 0; x < data.width(); ++x) {
        out.at(c, y, x) = data.sample(c, static_cast<float>(x) + flow.dx(y, x),
                                      static_cast<float>(y) + flow.dy(y, x));
      }
    }
  }
  return out;
}

namespace {

// Four source taps per output pixel, shared by all channels.
struct BilinearTaps {
  std::vector<std::uint32_t> index;  // 4 per pixel
  std::vector<float> weight;         // 4 per pixel
};

BilinearTaps bilinear_taps(const FlowField& flow) {
  const int h = flow.height(), w = flow.width();
  BilinearTaps taps;
  taps.index.resize(static_cast<std::size_t>(h) * w * 4);
  taps.weight.resize(taps.index.size());
  auto idx = [&](int y, int x) {
    return static_cast<std::uint32_t>(std::clamp(y, 0, h - 1) * w + std::clamp(x, 0, w - 1));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float sx = static_cast<float>(x) + flow.dx(y, x);
      const float sy = static_cast<float>(y) + flow.dy(y, x);
      const float fx = std::floor(sx), fy = std::floor(sy);
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const float ax = sx - fx, ay = sy - fy;
      const std::size_t base = (static_cast<std::size_t>(y) * w + x) * 4;
      taps.index[base + 0] = idx(y0, x0);
      taps.index[base + 1] = idx(y0, x0 + 1);
      taps.index[base + 2] = idx(y0 + 1, x0);
      taps.index[base + 3] = idx(y0 + 1, x0 + 1);
      taps.weight[base + 0] = (1.0f - ay) * (1.0f - ax);
      taps.weight[base + 1] = (1.0f - ay) * ax;
      taps.weight[base + 2] = ay * (1.0f - ax);
      taps.weight[base + 3] = ay * ax;
    }
  }
  return taps;
}

}  // namespace

Tensor warp(const Tensor& data, const FlowField& flow) {
  if (data.rank() != 3 || data.dim(1) != static_cast<std::size_t>(flow.height()) ||
      data.dim(2) != static_cast<std::size_t>(flow.width())) {
    throw std::invalid_argument("warp: tensor " + to_string(data.shape()) +
                                " does not match flow dimensions");
  }
  const std::size_t channels = data.dim(0);
  const std::size_t pixels = data.dim(1) * data.dim(2);
  BilinearTaps taps = bilinear_taps(flow);
  std::vector<float> out(channels * pixels);
  const auto in = data.data();
  for (std::size_t c = 0; c < channels; ++c) {
    const float* src = in.data() + c * pixels;
    float* dst = out.data() + c * pixels;
    for (std::size_t p = 0; p < pixels; ++p) {
      const std::size_t b = p * 4;
      const float top = taps.weight[b + 0] * src[taps.index[b + 0]] + taps.weight[b + 1] * src[taps.index[b + 1]];
      const float bottom = taps.weight[b + 2] * src[taps.index[b + 2]] + taps.weight[b + 3] * src[taps.index[b + 3]];
      dst[p] = top + bottom;
    }
  }
  return detail::make_result(data.shape(), std::move(out), {data},
                             [taps = std::move(taps), channels, pixels](detail::Node& self) {
    detail::Node* in = self.inputs[0].get();
    if (!in->requires_grad) return;
    auto g = in->grad_buffer();
    for (std::size_t c = 0; c < channels; ++c) {
      const float* src = self.grad.data() + c * pixels;
      float* dst = g.data() + c * pixels;
      for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t k = 0; k < 4; ++k) dst[taps.index[p * 4 + k]] += taps.weight[p * 4 + k] * src[p];
      }
    }
  }, "warp");
}

namespace {

constexpr float kFloMagic = 202021.25f;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  return v;
}

}  // namespace

FlowField read_flo(const fs::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 12) throw std::runtime_error(path.string() + ": truncated .flo header");
  if (std::bit_cast<float>(get_u32(bytes, 0)) != kFloMagic) {
    throw std::runtime_error(path.string() + ": bad .flo magic");
  }
  const auto width = static_cast<std::int32_t>(get_u32(bytes, 4));
  const auto height = static_cast<std::int32_t>(get_u32(bytes, 8));
  if (width <= 0 || height <= 0 || width > 100000 || height > 100000) {
    throw std::runtime_error(path.string() + ": invalid .flo dimensions");
  }
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() != 12 + count * 8) throw std::runtime_error(path.string() + ": .flo size mismatch");
  FlowField flow(height, width);
  std::size_t pos = 12;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const float dx = std::bit_cast<float>(get_u32(bytes, pos));
      const float dy = std::bit_cast<float>(get_u32(bytes, pos + 4));
      if (!std::isfinite(dx) || !std::isfinite(dy)) {
        throw std::runtime_error(path.string() + ": non-finite flow vector");
      }
      flow.dx(y, x) = dx;
      flow.dy(y, x) = dy;
      pos += 8;
    }
  }
  return flow;
}

void write_flo(const fs::path& path, const FlowField& flow) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + static_cast<std::size_t>(flow.height()) * flow.width() * 8);
  put_u32(out, std::bit_cast<std::uint32_t>(kFloMagic));
  put_u32(out, static_cast<std::uint32_t>(flow.width()));
  put_u32(out, static_cast<std::uint32_t>(flow.height()));
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      put_u32(out, std::bit_cast<std::uint32_t>(flow.dx(y, x)));
      put_u32(out, std::bit_cast<std::uint32_t>(flow.dy(y, x)));
    }
  }
  write_file_atomic(path, out);
}

FlowField LucasKanadeFlow::estimate(const Image& reference, const Image& secondary,
                                    std::size_t) const {
  return estimate_flow(reference, secondary, params_);
}

FlowField IdentityFlow::estimate(const Image& reference, const Image&, std::size_t) const {
  return FlowField(reference.height(), reference.width());
}

std::string flow_filename(std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "flow_%03zu.flo", index);
  return name;
}

FloDirectoryFlow::FloDirectoryFlow(fs::path dir) : dir_(std::move(dir)) {
  if (!fs::is_directory(dir_)) throw std::runtime_error("flow directory not found: " + dir_.string());
}

FlowField FloDirectoryFlow::estimate(const Image& reference, const Image&,
                                     std::size_t frame_index) const {
  FlowField flow = read_flo(dir_ / flow_filename(frame_index));
  if (flow.height() != reference.height() || flow.width() != reference.width()) {
    throw std::runtime_error(flow_filename(frame_index) + ": dimensions do not match the burst");
  }
  return flow;
}

AlignedStream align_stream(const Burst& stream, std::vector<Tensor> features,
                           const FlowEstimator& estimator) {
  stream.validate();
  if (features.size() != stream.size()) {
    throw std::invalid_argument("align_stream: " + std::to_string(features.size()) +
                                " feature stacks for " + std::to_string(stream.size()) + " frames");
  }
  const Image& ref = stream.reference();
  AlignedStream out;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Tensor& f = features[i];
    if (f.rank() != 3 || f.dim(1) != static_cast<std::size_t>(ref.height()) ||
        f.dim(2) != static_cast<std::size_t>(ref.width())) {
      throw std::invalid_argument("align_stream: feature stack " + std::to_string(i) +
                                  " does not match frame dimensions");
    }
    if (i == 0) {
      out.flows.emplace_back(ref.height(), ref.width());
      out.images.push_back(ref);
      out.features.push_back(f);
      continue;
    }
    FlowField flow = estimator.estimate(ref, stream.frames[i], i);
    out.images.push_back(warp(stream.frames[i], flow));
    out.features.push_back(warp(f, flow));
    out.flows.push_back(std::move(flow));
  }
  return out;
}

}  // namespace candid
