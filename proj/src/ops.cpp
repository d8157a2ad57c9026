#include "candid/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace candid {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

using detail::Node;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                                " vs " + to_string(b.shape()));
  }
}

void require_axis(const Tensor& a, std::size_t axis, const char* op) {
  if (axis >= a.rank()) {
    throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) +
                                " invalid for shape " + to_string(a.shape()));
  }
}

// Splits a shape around `axis` into (outer, length, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Node* grad_target(Node& self, std::size_t i) {
  Node* in = self.inputs[i].get();
  return in->requires_grad ? in : nullptr;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<float> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Node* in = grad_target(self, k)) {
        auto g = in->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    }
  }, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<float> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (Node* in = grad_target(self, 0)) {
      auto g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (Node* in = grad_target(self, 1)) {
      auto g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  }, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<float> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& x = self.inputs[0]->value;
    const auto& y = self.inputs[1]->value;
    if (Node* in = grad_target(self, 0)) {
      auto g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i];
    }
    if (Node* in = grad_target(self, 1)) {
      auto g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x[i];
    }
  }, "mul");
}

Tensor scale(const Tensor& a, float factor) {
  std::vector<float> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return detail::make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    if (Node* in = grad_target(self, 0)) {
      auto g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    }
  }, "scale");
}

Tensor relu(const Tensor& a) {
  std::vector<float> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
  return detail::make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    if (Node* in = grad_target(self, 0)) {
      auto g = in->grad_buffer();
      const auto& x = in->value;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] > 0.0f) g[i] += self.grad[i];
      }
    }
  }, "relu");
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (float v : a.data()) total += v;
  return detail::make_result({}, {static_cast<float>(total)}, {a}, [](Node& self) {
    if (Node* in = grad_target(self, 0)) {
      const float g0 = self.grad[0];
      for (auto& g : in->grad_buffer()) g += g0;
    }
  }, "sum");
}

Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0f / static_cast<float>(a.numel()));
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  require_axis(a, axis, "sum_axis");
  const AxisSplit s = split_at(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<float> out(s.outer * s.inner, 0.0f);
  const auto x = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.length; ++l) {
      const float* row = x.data() + (o * s.length + l) * s.inner;
      float* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += row[i];
    }
  }
  return detail::make_result(std::move(out_shape), std::move(out), {a}, [s](Node& self) {
    if (Node* in = grad_target(self, 0)) {
      auto g = in->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o) {
        const float* src = self.grad.data() + o * s.inner;
        for (std::size_t l = 0; l < s.length; ++l) {
          float* row = g.data() + (o * s.length + l) * s.inner;
          for (std::size_t i = 0; i < s.inner; ++i) row[i] += src[i];
        }
      }
    }
  }, "sum_axis");
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw std::invalid_argument("reshape: cannot view " + to_string(a.shape()) + " as " +
                                to_string(shape));
  }
  std::vector<float> out(a.data().begin(), a.data().end());
  return detail::make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    if (Node* in = grad_target(self, 0)) {
      auto g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  }, "reshape");
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& order) {
  const std::size_t rank = a.rank();
  if (order.size() != rank) throw std::invalid_argument("permute: order has wrong length");
  std::vector<bool> seen(rank, false);
  for (auto axis : order) {
    if (axis >= rank || seen[axis]) throw std::invalid_argument("permute: invalid order");
    seen[axis] = true;
  }
  const Shape& in_shape = a.shape();
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  Shape out_shape(rank);
  std::vector<std::size_t> gather_strides(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = in_shape[order[i]];
    gather_strides[i] = in_strides[order[i]];
  }
  // source offset for every output element, in output order
  std::vector<std::size_t> source(a.numel());
  std::vector<std::size_t> index(rank, 0);
  std::size_t offset = 0;
  for (std::size_t flat = 0; flat < source.size(); ++flat) {
    source[flat] = offset;
    for (std::size_t d = rank; d-- > 0;) {
      ++index[d];
      offset += gather_strides[d];
      if (index[d] < out_shape[d]) break;
      offset -= gather_strides[d] * out_shape[d];
      index[d] = 0;
    }
  }
  std::vector<float> out(source.size());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[source[i]];
  return detail::make_result(std::move(out_shape), std::move(out), {a},
                             [source = std::move(source)](Node& self) {
    if (Node* in = grad_target(self, 0)) {
      auto g = in->grad_buffer();
      for (std::size_t i = 0; i < source.size(); ++i) g[source[i]] += self.grad[i];
    }
  }, "permute");
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  require_axis(parts[0], axis, "concat");
  Shape out_shape = parts[0].shape();
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != out_shape.size()) throw std::invalid_argument("concat: rank mismatch");
    for (std::size_t d = 0; d < p.rank(); ++d) {
      if (d != axis && p.dim(d) != parts[0].dim(d)) {
        throw std::invalid_argument("concat: shape mismatch " + to_string(p.shape()) + " vs " +
                                    to_string(parts[0].shape()));
      }
    }
    out_shape[axis] += p.dim(axis);
  }
  const AxisSplit whole = split_at(out_shape, axis);
  std::vector<float> out(numel(out_shape));
  std::vector<std::size_t> lengths;
  std::size_t base = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.dim(axis);
    const auto x = p.data();
    for (std::size_t o = 0; o < whole.outer; ++o) {
      std::copy_n(x.data() + o * len * whole.inner, len * whole.inner,
                  out.data() + (o * whole.length + base) * whole.inner);
    }
    lengths.push_back(len);
    base += len;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return detail::make_result(std::move(out_shape), std::move(out), std::move(inputs),
                             [whole, lengths = std::move(lengths)](Node& self) {
    std::size_t base = 0;
    for (std::size_t k = 0; k < lengths.size(); ++k) {
      const std::size_t len = lengths[k];
      if (Node* in = grad_target(self, k)) {
        auto g = in->grad_buffer();
        for (std::size_t o = 0; o < whole.outer; ++o) {
          const float* src = self.grad.data() + (o * whole.length + base) * whole.inner;
          float* dst = g.data() + o * len * whole.inner;
          for (std::size_t i = 0; i < len * whole.inner; ++i) dst[i] += src[i];
        }
      }
      base += len;
    }
  }, "concat");
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  require_axis(a, axis, "slice");
  if (begin >= end || end > a.dim(axis)) throw std::invalid_argument("slice: invalid range");
  const AxisSplit s = split_at(a.shape(), axis);
  const std::size_t len = end - begin;
  Shape out_shape = a.shape();
  out_shape[axis] = len;
  std::vector<float> out(s.outer * len * s.inner);
  const auto x = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.data() + (o * s.length + begin) * s.inner, len * s.inner,
                out.data() + o * len * s.inner);
  }
  return detail::make_result(std::move(out_shape), std::move(out), {a},
                             [s, begin, len](Node& self) {
    if (Node* in = grad_target(self, 0)) {
      auto g = in->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o) {
        const float* src = self.grad.data() + o * len * s.inner;
        float* dst = g.data() + (o * s.length + begin) * s.inner;
        for (std::size_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
      }
    }
  }, "slice");
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  require_axis(a, axis, "softmax");
  const AxisSplit s = split_at(a.shape(), axis);
  const auto x = a.data();
  std::vector<float> out(x.size());
  constexpr float floor = std::numeric_limits<float>::min();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.length * s.inner + i;
      float peak = x[base];
      for (std::size_t l = 1; l < s.length; ++l) peak = std::max(peak, x[base + l * s.inner]);
      double total = 0.0;
      for (std::size_t l = 0; l < s.length; ++l) {
        const float e = std::exp(x[base + l * s.inner] - peak);
        out[base + l * s.inner] = e;
        total += e;
      }
      const float inv = static_cast<float>(1.0 / total);
      for (std::size_t l = 0; l < s.length; ++l) {
        float& v = out[base + l * s.inner];
        v = std::max(v * inv, floor);
      }
    }
  }
  return detail::make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
    if (Node* in = grad_target(self, 0)) {
      auto g = in->grad_buffer();
      const auto& y = self.value;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.length * s.inner + i;
          double dot = 0.0;
          for (std::size_t l = 0; l < s.length; ++l) {
            const std::size_t k = base + l * s.inner;
            dot += static_cast<double>(self.grad[k]) * y[k];
          }
          for (std::size_t l = 0; l < s.length; ++l) {
            const std::size_t k = base + l * s.inner;
            g[k] += y[k] * (self.grad[k] - static_cast<float>(dot));
          }
        }
      }
    }
  }, "softmax");
}

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, cout, k, pad, out_h, out_w;
  std::size_t patch() const { return cin * k * k; }
  std::size_t pixels() const { return out_h * out_w; }
};

void im2col(const float* input, const ConvGeometry& g, float* cols) {
  const std::size_t pixels = g.pixels();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        float* row = cols + ((c * g.k + ky) * g.k + kx) * pixels;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad);
          float* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill_n(dst, g.out_w, 0.0f);
            continue;
          }
          const float* src = input + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0f : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, const ConvGeometry& g, float* input_grad) {
  const std::size_t pixels = g.pixels();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const float* row = cols + ((c * g.k + ky) * g.k + kx) * pixels;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          float* dst = input_grad + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const float* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, Padding padding) {
  if (input.rank() != 3) throw std::invalid_argument("conv2d: input must be [Cin,H,W]");
  if (weight.rank() != 4) throw std::invalid_argument("conv2d: weight must be [Cout,Cin,k,k]");
  if (bias.rank() != 1) throw std::invalid_argument("conv2d: bias must be [Cout]");
  ConvGeometry g{};
  g.cin = input.dim(0);
  g.h = input.dim(1);
  g.w = input.dim(2);
  g.cout = weight.dim(0);
  g.k = weight.dim(2);
  if (weight.dim(1) != g.cin) {
    throw std::invalid_argument("conv2d: weight expects " + std::to_string(weight.dim(1)) +
                                " input channels, got " + std::to_string(g.cin));
  }
  if (weight.dim(3) != g.k) throw std::invalid_argument("conv2d: kernel must be square");
  if (g.k % 2 == 0) throw std::invalid_argument("conv2d: kernel size must be odd");
  if (bias.dim(0) != g.cout) throw std::invalid_argument("conv2d: bias length mismatch");
  if (padding == Padding::Same) {
    g.pad = (g.k - 1) / 2;
    g.out_h = g.h;
    g.out_w = g.w;
  } else {
    if (g.h < g.k || g.w < g.k) throw std::invalid_argument("conv2d: input smaller than kernel");
    g.pad = 0;
    g.out_h = g.h - g.k + 1;
    g.out_w = g.w - g.k + 1;
  }

  std::vector<float> cols(g.patch() * g.pixels());
  im2col(input.data().data(), g, cols.data());

  std::vector<float> out(g.cout * g.pixels());
  {
    ConstMatrixMap w(weight.data().data(), static_cast<Eigen::Index>(g.cout),
                     static_cast<Eigen::Index>(g.patch()));
    ConstMatrixMap c(cols.data(), static_cast<Eigen::Index>(g.patch()),
                     static_cast<Eigen::Index>(g.pixels()));
    MatrixMap o(out.data(), static_cast<Eigen::Index>(g.cout),
                static_cast<Eigen::Index>(g.pixels()));
    // Double accumulation, one rounding per output.
    using RowMatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    RowMatrixD acc = w.cast<double>() * c.cast<double>();
    const auto b = bias.data();
    for (std::size_t oc = 0; oc < g.cout; ++oc) {
      acc.row(static_cast<Eigen::Index>(oc)).array() += static_cast<double>(b[oc]);
    }
    o = acc.cast<float>();
  }
  if (!grad_enabled()) cols.clear();

  return detail::make_result({g.cout, g.out_h, g.out_w}, std::move(out), {input, weight, bias},
                             [g, cols = std::move(cols)](Node& self) {
    const auto rows = static_cast<Eigen::Index>(g.cout);
    const auto pixels = static_cast<Eigen::Index>(g.pixels());
    const auto patch = static_cast<Eigen::Index>(g.patch());
    ConstMatrixMap grad_out(self.grad.data(), rows, pixels);
    if (Node* w = grad_target(self, 1)) {
      MatrixMap gw(w->grad_buffer().data(), rows, patch);
      ConstMatrixMap c(cols.data(), patch, pixels);
      gw.noalias() += grad_out * c.transpose();
    }
    if (Node* b = grad_target(self, 2)) {
      auto gb = b->grad_buffer();
      // Plain loop: Eigen's vectorized sum peels by address, which breaks run-to-run equality.
      for (std::size_t oc = 0; oc < g.cout; ++oc) {
        const float* row = self.grad.data() + oc * g.pixels();
        double acc = 0.0;
        for (std::size_t i = 0; i < g.pixels(); ++i) acc += row[i];
        gb[oc] += static_cast<float>(acc);
      }
    }
    if (Node* in = grad_target(self, 0)) {
      ConstMatrixMap w(self.inputs[1]->value.data(), rows, patch);
      std::vector<float> grad_cols(g.patch() * g.pixels());
      MatrixMap gc(grad_cols.data(), patch, pixels);
      gc.noalias() = w.transpose() * grad_out;
      col2im_add(grad_cols.data(), g, in->grad_buffer().data());
    }
  }, "conv2d");
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "l1_loss");
  const auto p = pred.data(), t = target.data();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(static_cast<double>(p[i]) - t[i]);
  const double count = static_cast<double>(p.size());
  return detail::make_result({}, {static_cast<float>(total / count)}, {pred, target},
                             [count](Node& self) {
    const auto& p = self.inputs[0]->value;
    const auto& t = self.inputs[1]->value;
    const float step = static_cast<float>(self.grad[0] / count);
    auto sign = [](float d) { return d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f); };
    if (Node* in = grad_target(self, 0)) {
      auto g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += step * sign(p[i] - t[i]);
    }
    if (Node* in = grad_target(self, 1)) {
      auto g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= step * sign(p[i] - t[i]);
    }
  }, "l1_loss");
}

}  // namespace candid
