#pragma once

// Dense float tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a graph node; copies share storage. Ops in
// ops.hpp build the graph as they compute, and backward() walks it once in
// reverse topological order. Gradients are retained on leaves only and
// accumulate additively until zero_grad() is called.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace candid {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when a forward value or a propagated gradient is NaN or infinite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  bool consumed = false;
  const char* op_name = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return inputs.empty() && !backward_fn; }
  std::span<float> grad_buffer();  // zero-filled on first use
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<float> data,
                          bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const float> data() const;
  // Direct write access. Only meaningful on leaves (parameters, inputs).
  std::span<float> mutable_data();
  float item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> mutable_grad();
  void zero_grad();
  void clear_grad();

  // Same values, detached from the graph.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Runs reverse-mode differentiation from a scalar loss. Each graph may be
/// differentiated once; a second call on a consumed graph throws.
void backward(const Tensor& loss);

void zero_grad(std::span<Tensor> tensors);

bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

void check_finite(std::span<const float> values, const char* what);

// Wraps a freshly computed value as a graph node. The backward function is
// kept only when recording is on and some input requires a gradient.
Tensor make_result(Shape shape, std::vector<float> value,
                   std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn,
                   const char* op_name);

}  // namespace detail

}  // namespace candid
