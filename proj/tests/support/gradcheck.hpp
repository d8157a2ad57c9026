#pragma once

// Central finite-difference gradient checks. The checked scalar is a fixed
// random projection sum(r * f(inputs)) evaluated in double, which keeps the
// difference quotient well above float rounding noise.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "candid/tensor.hpp"

namespace candid::testing {

struct NamedInput {
  std::string name;
  Tensor tensor;  // leaf with requires_grad set
};

struct GradCheckReport {
  double worst_error = 0.0;  // normwise ||analytic - numeric|| / max(||analytic||, ||numeric||)
  std::string worst_input;
  std::vector<double> errors;  // per input, same order
  double combined_error = 0.0;  // normwise over all inputs flattened into one vector
  std::size_t checked = 0;  // coordinates compared
  std::size_t skipped = 0;  // coordinates whose +-h step flipped a ReLU
};

/// With `skip_relu_kinks`, a coordinate is left out when any ReLU in the
/// graph changes its active set between x - h and x + h: the function is not
/// differentiable on that segment, so the difference quotient says nothing
/// about the analytic gradient there.
GradCheckReport gradcheck(const std::function<Tensor()>& f, std::vector<NamedInput> inputs,
                          std::uint64_t seed = 1, double h = 1e-3, bool skip_relu_kinks = false);

/// Uniform values in [lo, hi].
Tensor random_tensor(Shape shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f,
                     bool requires_grad = true);

}  // namespace candid::testing
