#pragma once

// Differentiable tensor operations. Every op validates shapes, rejects
// non-finite results, and records a backward closure when any input
// requires a gradient.

#include <cstddef>
#include <span>
#include <vector>

#include "candid/tensor.hpp"

namespace candid {

enum class Padding { Same, Valid };

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor relu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Reduces `axis` away.
Tensor sum_axis(const Tensor& a, std::size_t axis);

Tensor reshape(const Tensor& a, Shape shape);
/// out.shape[i] == a.shape[order[i]]
Tensor permute(const Tensor& a, const std::vector<std::size_t>& order);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);

/// Max-subtracted softmax. Outputs are floored at the smallest normal float
/// so every entry stays strictly positive.
Tensor softmax(const Tensor& a, std::size_t axis);

/// Cross-correlation of input [Cin,H,W] with weight [Cout,Cin,k,k] plus
/// bias [Cout]; k must be odd. Same padding zero-pads by (k-1)/2.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              Padding padding = Padding::Same);

/// Mean absolute difference; gradient is sign(pred - target) / count and 0
/// at ties.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

}  // namespace candid
