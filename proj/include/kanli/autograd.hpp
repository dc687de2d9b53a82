// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "kanli/kernels.hpp"
#include "kanli/tensor.hpp"

namespace kanli {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents.
  std::function<void(Node&)> backward;

  void accumulate(const Tensor& delta);
};

}  // namespace detail

/// Handle to a value recorded in the computation graph.
///
/// Forward ops build nodes; backward() walks them in reverse topological
/// order. A graph is confined to one thread; parameters shared between graphs
/// must not be differentiated concurrently.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  /// Gradient after backward(); a zero tensor if nothing reached this node.
  Tensor grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool valid() const { return static_cast<bool>(node_); }

  void zero_grad();

  // Internal: used by ops to build nodes.
  static Var from_node(std::shared_ptr<detail::Node> node);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Leaf holding a constant (no gradient).
Var constant(Tensor value);

/// Populates gradients of every node reachable from a scalar loss.
/// Throws ContractError if loss holds more than one element.
void backward(const Var& loss);

namespace ops {

Var matmul(const Var& a, const Var& b, bool transpose_a = false,
           bool transpose_b = false);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
/// [n x d] + broadcast row vector [d].
Var add_row_bias(const Var& x, const Var& bias);
/// [H x W x C] + broadcast channel vector [C].
Var add_channel_bias(const Var& x, const Var& bias);
/// a + a * e, cellwise; the literal attention adjustment.
Var scale_by_one_plus(const Var& a, const Var& e);
Var softmax_rows(const Var& x, std::size_t valid_cols = 0);
Var layer_norm(const Var& x, const Var& gain, const Var& bias,
               double eps = kernels::kDefaultLayerNormEps);
Var gelu(const Var& x);
Var conv2d(const Var& input, const Var& filters, std::size_t stride,
           kernels::Padding padding);
Var max_pool2d(const Var& input, std::size_t size, std::size_t stride);
Var avg_pool_last_axis(const Var& x);
/// Selects rows of a [V x d] table.
Var gather_rows(const Var& table, std::span<const std::size_t> ids);
/// Concatenates along the last axis; all inputs share leading dims.
Var concat_last(const std::vector<Var>& parts);
/// Columns [begin, begin + count) of a matrix.
Var slice_cols(const Var& x, std::size_t begin, std::size_t count);
/// Row i of a matrix as a [1 x d] matrix.
Var row(const Var& x, std::size_t i);
Var reshape(const Var& x, Shape shape);
Var transpose(const Var& x);
Var sum(const Var& x);
/// -log softmax(logits)[label] for a logits vector of any rank-1 shape.
Var cross_entropy(const Var& logits, std::size_t label);

}  // namespace ops
}  // namespace kanli
