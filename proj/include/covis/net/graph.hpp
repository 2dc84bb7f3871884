#pragma once

// Minimal reverse-mode differentiation over row-major matrices.
//
// A Graph records one forward pass. Every op returns a node id; backward()
// walks the tape in reverse and accumulates gradients. Parameter leaves keep
// their gradients inside the graph so several graphs can run concurrently
// against the same read-only parameters.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace covis::net {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return v.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

class Graph {
 public:
  using Id = int;

  Graph() { nodes_.reserve(512); }

  /// Constant input; receives no gradient.
  Id constant(Matrix value);
  /// Leaf bound to parameter slot `param_index`; its gradient is readable
  /// through param_grads() after backward().
  Id parameter(const Matrix& value, int param_index, bool trainable = true);

  const Matrix& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad(Id id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  double scalar(Id id) const { return value(id).v.at(0); }

  // Linear algebra
  Id matmul(Id a, Id b);     ///< a (r x k) * b (k x c)
  Id matmul_bt(Id a, Id b);  ///< a (r x k) * b^T, b (c x k)
  Id add(Id a, Id b);        ///< same shape
  Id add_row(Id a, Id row);  ///< row (1 x c) broadcast over a's rows
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);        ///< elementwise, same shape
  Id scale(Id a, double s);
  Id add_scalar(Id a, double s);

  // Row-wise ops
  Id softmax_rows(Id a);
  Id layer_norm_rows(Id a, Id gamma, Id beta, double eps = 1e-5);
  Id l2_normalize_rows(Id a);
  Id mean_rows(Id a);  ///< 1 x c
  Id concat_cols(std::span<const Id> parts);
  Id slice_cols(Id a, int start, int count);

  // Pointwise
  Id gelu(Id a);  ///< tanh approximation
  Id exp(Id a);
  Id log(Id a);

  // Reductions / losses (1 x 1 results)
  Id sum(Id a);
  /// sum((a - target)^2) against a constant target.
  Id squared_error(Id a, const Matrix& target);
  /// Mean over labelled pixels of -log softmax(logits)[label]. `logits` is
  /// tokens x (pixels_per_token * classes); `labels` holds one entry per
  /// (token, pixel) in token-major order, -1 for ignored pixels. Zero labelled
  /// pixels give a zero loss.
  Id cross_entropy(Id logits, std::span<const int> labels, int classes);

  void backward(Id loss);

  /// (param_index, gradient) for every trainable parameter leaf touched by
  /// backward, in leaf creation order.
  std::vector<std::pair<int, const Matrix*>> param_grads() const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    std::function<void(Graph&, Id self)> back;
  };

  Id push(Matrix value, bool needs_grad, std::function<void(Graph&, Id)> back);
  Node& node(Id id) { return nodes_[static_cast<std::size_t>(id)]; }
  bool needs(Id id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  Matrix& grad_of(Id id);

  std::vector<Node> nodes_;
  std::vector<std::pair<Id, int>> params_;
};

}  // namespace covis::net
