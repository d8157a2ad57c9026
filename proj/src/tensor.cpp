#include "candid/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace candid {

namespace {
thread_local bool t_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

std::span<float> Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0f);
  return grad;
}

void check_finite(std::span<const float> values, const char* what) {
  // Branch-free scan on the exponent bits so the loop vectorizes.
  std::uint32_t all_ones = 0;
  for (float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    all_ones |= static_cast<std::uint32_t>((bits & 0x7f800000u) == 0x7f800000u);
  }
  if (all_ones != 0) throw NonFiniteError(std::string("non-finite value produced by ") + what);
}

Tensor make_result(Shape shape, std::vector<float> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn, const char* op_name) {
  check_finite(value, op_name);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op_name = op_name;
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) {
      if (in.defined() && in.node()->requires_grad) needs_grad = true;
    }
  }
  if (needs_grad) {
    node->requires_grad = true;
    for (auto& in : inputs) {
      if (in.node()->consumed) {
        throw std::logic_error(std::string(op_name) + ": input graph already consumed");
      }
      node->inputs.push_back(in.node());
    }
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  const auto n = candid::numel(shape);
  return from_data(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
  for (auto extent : shape) {
    if (extent == 0) throw std::invalid_argument("tensor extents must be positive");
  }
  if (candid::numel(shape) != data.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + to_string(shape));
  }
  detail::check_finite(data, "tensor construction");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw std::out_of_range("tensor axis out of range");
  return s[axis];
}

std::size_t Tensor::numel() const { return node_->value.size(); }

std::span<const float> Tensor::data() const { return node_->value; }

std::span<float> Tensor::mutable_data() { return node_->value; }

float Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on a non-scalar tensor");
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!node_->is_leaf()) throw std::logic_error("requires_grad can only be set on leaves");
  node_->requires_grad = flag;
  if (!flag) node_->grad.clear();
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const float> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor has no gradient");
  return node_->grad;
}

std::span<float> Tensor::mutable_grad() { return node_->grad_buffer(); }

void Tensor::zero_grad() {
  if (node_->requires_grad) {
    auto g = node_->grad_buffer();
    std::fill(g.begin(), g.end(), 0.0f);
  }
}

void Tensor::clear_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from_data(shape(), node_->value, false); }

void zero_grad(std::span<Tensor> tensors) {
  for (auto& t : tensors) t.zero_grad();
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward on undefined tensor");
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                to_string(loss.shape()));
  }
  detail::Node* root = loss.node().get();
  if (root->consumed) throw std::logic_error("backward: graph already consumed");
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs before users).
  // Owning pointers: releasing a node's inputs below must not free nodes
  // still waiting for their turn.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack{{loss.node(), 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      std::shared_ptr<detail::Node> child = node->inputs[next++];
      if (child->requires_grad && !visited.count(child.get())) {
        visited.insert(child.get());
        stack.emplace_back(std::move(child), 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = it->get();
    if (node->is_leaf()) continue;
    if (!node->grad.empty()) {
      detail::check_finite(node->grad, "backward");
      node->backward_fn(*node);
    }
    // Interior state is released; the graph cannot be walked again.
    node->backward_fn = nullptr;
    node->inputs.clear();
    node->grad.clear();
    node->grad.shrink_to_fit();
    node->consumed = true;
  }
  for (const auto& node : order) {
    if (!node->consumed && !node->grad.empty()) detail::check_finite(node->grad, "backward");
  }
}

}  // namespace candid
