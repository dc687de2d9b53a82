// SPDX-License-Identifier: Apache-2.0
#include "kanli/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "kanli/errors.hpp"

namespace kanli {

void detail::Node::accumulate(const Tensor& delta) {
  if (grad.empty()) {
    grad = delta;
    return;
  }
  auto g = grad.data();
  const auto d = delta.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
}

Var::Var(Tensor value, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::from_node(std::shared_ptr<detail::Node> node) {
  Var v;
  v.node_ = std::move(node);
  return v;
}

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor(node_->value.shape());
  return node_->grad;
}

void Var::zero_grad() { node_->grad = Tensor(); }

Var constant(Tensor value) { return Var(std::move(value), false); }

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Var make_node(Tensor value, std::initializer_list<Var> inputs,
              std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const Var& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const Var& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(backward);
  }
  return Var::from_node(std::move(node));
}

// Parent i of a node, or nullptr when it does not need a gradient.
Node* wants(Node& self, std::size_t i) {
  Node* p = self.parents[i].get();
  return p->requires_grad ? p : nullptr;
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

}  // namespace

void backward(const Var& loss) {
  if (!loss.valid() || loss.value().size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.valid() ? shape_to_string(loss.shape()) : "<null>"));
  }
  const NodePtr& root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->accumulate(Tensor(root->value.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

namespace ops {

Var matmul(const Var& a, const Var& b, bool transpose_a, bool transpose_b) {
  Tensor out = kernels::matmul(a.value(), b.value(), transpose_a, transpose_b);
  return make_node(std::move(out), {a, b}, [transpose_a, transpose_b](Node& self) {
    const Tensor& A = self.parents[0]->value;
    const Tensor& B = self.parents[1]->value;
    const Tensor& G = self.grad;
    if (Node* pa = wants(self, 0)) {
      // C = op(A) op(B): dA = G op(B)^T, transposed back when A was read as A^T.
      pa->accumulate(transpose_a ? kernels::matmul(B, G, transpose_b, true)
                                 : kernels::matmul(G, B, false, !transpose_b));
    }
    if (Node* pb = wants(self, 1)) {
      pb->accumulate(transpose_b ? kernels::matmul(G, A, true, transpose_a)
                                 : kernels::matmul(A, G, !transpose_a, false));
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    if (Node* pa = wants(self, 0)) pa->accumulate(self.grad);
    if (Node* pb = wants(self, 1)) pb->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    if (Node* pa = wants(self, 0)) pa->accumulate(self.grad);
    if (Node* pb = wants(self, 1)) {
      Tensor neg = self.grad;
      for (auto& v : neg.data()) v = -v;
      pb->accumulate(neg);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const Tensor& A = self.parents[0]->value;
    const Tensor& B = self.parents[1]->value;
    if (Node* pa = wants(self, 0)) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= B[i];
      pa->accumulate(g);
    }
    if (Node* pb = wants(self, 1)) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= A[i];
      pb->accumulate(g);
    }
  });
}

Var scale(const Var& x, double factor) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= factor;
  return make_node(std::move(out), {x}, [factor](Node& self) {
    Tensor g = self.grad;
    for (auto& v : g.data()) v *= factor;
    self.parents[0]->accumulate(g);
  });
}

Var add_row_bias(const Var& x, const Var& bias) {
  if (x.value().rank() != 2 || bias.value().size() != x.value().dim(1)) {
    throw DimensionError("add_row_bias: " + shape_to_string(x.shape()) + " + " +
                         shape_to_string(bias.shape()));
  }
  const std::size_t d = bias.value().size();
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias.value()[i % d];
  return make_node(std::move(out), {x, bias}, [d](Node& self) {
    if (Node* px = wants(self, 0)) px->accumulate(self.grad);
    if (Node* pb = wants(self, 1)) {
      Tensor g(Shape{d});
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % d] += self.grad[i];
      pb->accumulate(g);
    }
  });
}

Var add_channel_bias(const Var& x, const Var& bias) {
  const Tensor& X = x.value();
  if (X.rank() == 0 || bias.value().size() != X.shape().back()) {
    throw DimensionError("add_channel_bias: " + shape_to_string(x.shape()) +
                         " + " + shape_to_string(bias.shape()));
  }
  // Same broadcasting as add_row_bias over the flattened leading axes.
  const std::size_t c = bias.value().size();
  Var flat = reshape(x, Shape{X.size() / c, c});
  return reshape(add_row_bias(flat, bias), X.shape());
}

Var scale_by_one_plus(const Var& a, const Var& e) {
  require_same_shape(a, e, "scale_by_one_plus");
  const Tensor& A = a.value();
  const Tensor& E = e.value();
  Tensor out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + A[i] * E[i];
  return make_node(std::move(out), {a, e}, [](Node& self) {
    const Tensor& A2 = self.parents[0]->value;
    const Tensor& E2 = self.parents[1]->value;
    if (Node* pa = wants(self, 0)) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 + E2[i];
      pa->accumulate(g);
    }
    if (Node* pe = wants(self, 1)) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= A2[i];
      pe->accumulate(g);
    }
  });
}

Var softmax_rows(const Var& x, std::size_t valid_cols) {
  Tensor out = kernels::softmax_rows(x.value(), valid_cols);
  return make_node(std::move(out), {x}, [](Node& self) {
    self.parents[0]->accumulate(kernels::softmax_rows_backward(self.value, self.grad));
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  auto cache = std::make_shared<kernels::LayerNormCache>();
  Tensor out = kernels::layer_norm(x.value(), gain.value(), bias.value(), eps,
                                   cache.get());
  return make_node(std::move(out), {x, gain, bias}, [cache](Node& self) {
    auto g = kernels::layer_norm_backward(*cache, self.parents[1]->value, self.grad);
    if (Node* px = wants(self, 0)) px->accumulate(g.dx);
    if (Node* pg = wants(self, 1)) pg->accumulate(g.dgain);
    if (Node* pb = wants(self, 2)) pb->accumulate(g.dbias);
  });
}

Var gelu(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = kernels::gelu(v);
  return make_node(std::move(out), {x}, [](Node& self) {
    const Tensor& X = self.parents[0]->value;
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= kernels::gelu_derivative(X[i]);
    self.parents[0]->accumulate(g);
  });
}

Var conv2d(const Var& input, const Var& filters, std::size_t stride,
           kernels::Padding padding) {
  Tensor out = kernels::conv2d(input.value(), filters.value(), stride, padding);
  return make_node(std::move(out), {input, filters}, [stride, padding](Node& self) {
    const Tensor& in = self.parents[0]->value;
    const Tensor& w = self.parents[1]->value;
    if (Node* pi = wants(self, 0)) {
      pi->accumulate(kernels::conv2d_backward_input(in.shape(), w, self.grad, stride,
                                                    padding));
    }
    if (Node* pw = wants(self, 1)) {
      pw->accumulate(kernels::conv2d_backward_filters(in, w.shape(), self.grad,
                                                      stride, padding));
    }
  });
}

Var max_pool2d(const Var& input, std::size_t size, std::size_t stride) {
  auto argmax = std::make_shared<std::vector<std::size_t>>();
  Tensor out = kernels::max_pool2d(input.value(), size, stride, argmax.get());
  return make_node(std::move(out), {input}, [argmax](Node& self) {
    Tensor g(self.parents[0]->value.shape());
    for (std::size_t o = 0; o < argmax->size(); ++o) g[(*argmax)[o]] += self.grad[o];
    self.parents[0]->accumulate(g);
  });
}

Var avg_pool_last_axis(const Var& x) {
  Tensor out = kernels::avg_pool_last_axis(x.value());
  return make_node(std::move(out), {x}, [](Node& self) {
    const Tensor& X = self.parents[0]->value;
    const std::size_t k = X.shape().back();
    Tensor g(X.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = self.grad[i / k] / static_cast<double>(k);
    }
    self.parents[0]->accumulate(g);
  });
}

Var gather_rows(const Var& table, std::span<const std::size_t> ids) {
  const Tensor& T = table.value();
  if (T.rank() != 2) throw DimensionError("gather_rows expects a matrix");
  const std::size_t d = T.dim(1);
  Tensor out(Shape{ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= T.dim(0)) {
      throw DimensionError("row id " + std::to_string(ids[r]) +
                           " out of range for table " + shape_to_string(T.shape()));
    }
    std::copy_n(&T.data()[ids[r] * d], d, &out.data()[r * d]);
  }
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return make_node(std::move(out), {table}, [rows = std::move(rows), d](Node& self) {
    Tensor g(self.parents[0]->value.shape());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t j = 0; j < d; ++j) g[rows[r] * d + j] += self.grad[r * d + j];
    }
    self.parents[0]->accumulate(g);
  });
}

Var concat_last(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_last of nothing");
  const Shape& first = parts.front().shape();
  if (first.empty()) throw DimensionError("concat_last on scalars");
  const std::size_t rows = shape_size(first) / first.back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() ||
        !std::equal(s.begin(), s.end() - 1, first.begin())) {
      throw DimensionError("concat_last: " + shape_to_string(s) +
                           " incompatible with " + shape_to_string(first));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  Shape out_shape = first;
  out_shape.back() = total;
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& src = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(&src.data()[r * widths[k]], widths[k],
                  &out.data()[r * total + offset]);
    }
    offset += widths[k];
  }

  auto node = std::make_shared<Node>();
  node->value = std::move(out);
  for (const Var& p : parts) node->requires_grad |= p.requires_grad();
  if (node->requires_grad) {
    for (const Var& p : parts) node->parents.push_back(p.node());
    node->backward = [widths, rows, total](Node& self) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < widths.size(); ++k) {
        if (Node* p = wants(self, k)) {
          Tensor g(p->value.shape());
          for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(&self.grad.data()[r * total + off], widths[k],
                        &g.data()[r * widths[k]]);
          }
          p->accumulate(g);
        }
        off += widths[k];
      }
    };
  }
  return Var::from_node(std::move(node));
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t count) {
  const Tensor& X = x.value();
  if (X.rank() != 2 || begin + count > X.dim(1)) {
    throw DimensionError("slice_cols out of range for " + shape_to_string(X.shape()));
  }
  const std::size_t rows = X.dim(0), cols = X.dim(1);
  Tensor out(Shape{rows, count});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(&X.data()[r * cols + begin], count, &out.data()[r * count]);
  }
  return make_node(std::move(out), {x}, [begin, count, rows, cols](Node& self) {
    Tensor g(Shape{rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(&self.grad.data()[r * count], count, &g.data()[r * cols + begin]);
    }
    self.parents[0]->accumulate(g);
  });
}

Var row(const Var& x, std::size_t i) {
  const Tensor& X = x.value();
  if (X.rank() != 2 || i >= X.dim(0)) {
    throw DimensionError("row " + std::to_string(i) + " out of range for " +
                         shape_to_string(X.shape()));
  }
  const std::size_t d = X.dim(1);
  Tensor out(Shape{1, d});
  std::copy_n(&X.data()[i * d], d, out.data().begin());
  return make_node(std::move(out), {x}, [i, d](Node& self) {
    Tensor g(self.parents[0]->value.shape());
    std::copy_n(self.grad.data().begin(), d, &g.data()[i * d]);
    self.parents[0]->accumulate(g);
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(shape);
  return make_node(std::move(out), {x}, [](Node& self) {
    self.parents[0]->accumulate(self.grad.reshaped(self.parents[0]->value.shape()));
  });
}

Var transpose(const Var& x) {
  const Tensor& X = x.value();
  if (X.rank() != 2) throw DimensionError("transpose expects a matrix");
  const std::size_t r = X.dim(0), c = X.dim(1);
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = X[i * c + j];
  }
  return make_node(std::move(out), {x}, [r, c](Node& self) {
    Tensor g(Shape{r, c});
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] = self.grad[j * r + i];
    }
    self.parents[0]->accumulate(g);
  });
}

Var sum(const Var& x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return make_node(Tensor::scalar(total), {x}, [](Node& self) {
    self.parents[0]->accumulate(Tensor(self.parents[0]->value.shape(), self.grad[0]));
  });
}

Var cross_entropy(const Var& logits, std::size_t label) {
  const Tensor& z = logits.value();
  if (label >= z.size()) {
    throw ContractError("label " + std::to_string(label) + " out of range for " +
                        std::to_string(z.size()) + " classes");
  }
  const double peak = *std::max_element(z.data().begin(), z.data().end());
  double total = 0.0;
  for (double v : z.data()) total += std::exp(v - peak);
  const double log_norm = peak + std::log(total);
  return make_node(Tensor::scalar(log_norm - z[label]), {logits},
                   [label, log_norm](Node& self) {
                     const Tensor& Z = self.parents[0]->value;
                     Tensor g(Z.shape());
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       g[i] = std::exp(Z[i] - log_norm) * self.grad[0];
                     }
                     g[label] -= self.grad[0];
                     self.parents[0]->accumulate(g);
                   });
}

}  // namespace ops
}  // namespace kanli
