// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_TENSOR_H_
#define NITCG_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nitcg::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;

// Backward closure of a node: reads node.grad and accumulates into the
// gradients of node.parents.
using BackwardFn = std::function<void(Node& node)>;

struct Node {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  float* grad_buffer();  // allocates zeros on first use
};

// Dense row-major float tensor taking part in a reverse-mode tape.
//
// Copies share the underlying node (like a handle); use clone() or
// detach() for an independent value.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values,
                     bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  std::span<const float> data() const;
  std::span<float> mutable_data();
  float item() const;
  float at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const float> grad() const;
  void zero_grad();

  // Value copy cut from the tape.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  // Runs reverse-mode differentiation from this scalar.
  void backward() const;

  // Creates a tensor whose gradient flows into `parents` through `fn`.
  // When no parent requires a gradient the tape is not extended.
  static Tensor make_result(Shape shape, std::vector<float> values,
                            std::vector<Tensor> parents, BackwardFn fn);

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

// Disables tape construction on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace nitcg::ad

#endif  // NITCG_TENSOR_H_
