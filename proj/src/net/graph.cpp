#include "covis/net/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace covis::net {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(std::string("graph: ") + what);
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> view(const Matrix& m) { return {m.v.data(), m.rows, m.cols}; }
Eigen::Map<RowMat> view(Matrix& m) { return {m.v.data(), m.rows, m.cols}; }

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) { view(c).noalias() += view(a) * view(b); }
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) { view(c).noalias() += view(a) * view(b).transpose(); }
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) { view(c).noalias() += view(a).transpose() * view(b); }

constexpr double kGeluK = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluC = 0.044715;

}  // namespace

Graph::Id Graph::push(Matrix value, bool needs_grad, std::function<void(Graph&, Id)> back) {
  nodes_.push_back(Node{std::move(value), Matrix{}, needs_grad, std::move(back)});
  return static_cast<Id>(nodes_.size() - 1);
}

Matrix& Graph::grad_of(Id id) {
  Node& n = node(id);
  if (n.grad.size() != n.value.size()) n.grad = Matrix(n.value.rows, n.value.cols, 0.0);
  return n.grad;
}

Graph::Id Graph::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Graph::Id Graph::parameter(const Matrix& value, int param_index, bool trainable) {
  const Id id = push(value, trainable, nullptr);
  if (trainable) params_.emplace_back(id, param_index);
  return id;
}

Graph::Id Graph::matmul(Id a, Id b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.cols == B.rows, "matmul shape mismatch");
  Matrix C(A.rows, B.cols);
  gemm_nn(A, B, C);
  return push(std::move(C), needs(a) || needs(b), [a, b](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    if (g.needs(a)) {
      // dA = G * B^T
      gemm_nt(G, g.value(b), g.grad_of(a));
    }
    if (g.needs(b)) {
      // dB = A^T * G
      gemm_tn(g.value(a), G, g.grad_of(b));
    }
  });
}

Graph::Id Graph::matmul_bt(Id a, Id b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.cols == B.cols, "matmul_bt shape mismatch");
  Matrix C(A.rows, B.rows);
  gemm_nt(A, B, C);
  return push(std::move(C), needs(a) || needs(b), [a, b](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    if (g.needs(a)) gemm_nn(G, g.value(b), g.grad_of(a));   // dA = G * B
    if (g.needs(b)) gemm_tn(G, g.value(a), g.grad_of(b));   // dB = G^T * A
  });
}

Graph::Id Graph::add(Id a, Id b) {
  require(value(a).same_shape(value(b)), "add shape mismatch");
  Matrix C = value(a);
  const Matrix& B = value(b);
  for (std::size_t i = 0; i < C.size(); ++i) C.v[i] += B.v[i];
  return push(std::move(C), needs(a) || needs(b), [a, b](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    for (Id x : {a, b}) {
      if (!g.needs(x)) continue;
      Matrix& D = g.grad_of(x);
      for (std::size_t i = 0; i < D.size(); ++i) D.v[i] += G.v[i];
    }
  });
}

Graph::Id Graph::sub(Id a, Id b) {
  require(value(a).same_shape(value(b)), "sub shape mismatch");
  Matrix C = value(a);
  const Matrix& B = value(b);
  for (std::size_t i = 0; i < C.size(); ++i) C.v[i] -= B.v[i];
  return push(std::move(C), needs(a) || needs(b), [a, b](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    if (g.needs(a)) {
      Matrix& D = g.grad_of(a);
      for (std::size_t i = 0; i < D.size(); ++i) D.v[i] += G.v[i];
    }
    if (g.needs(b)) {
      Matrix& D = g.grad_of(b);
      for (std::size_t i = 0; i < D.size(); ++i) D.v[i] -= G.v[i];
    }
  });
}

Graph::Id Graph::add_row(Id a, Id row) {
  const Matrix& R = value(row);
  require(R.rows == 1 && R.cols == value(a).cols, "add_row shape mismatch");
  Matrix C = value(a);
  for (int i = 0; i < C.rows; ++i)
    for (int j = 0; j < C.cols; ++j) C(i, j) += R.v[static_cast<std::size_t>(j)];
  return push(std::move(C), needs(a) || needs(row), [a, row](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    if (g.needs(a)) {
      Matrix& D = g.grad_of(a);
      for (std::size_t i = 0; i < D.size(); ++i) D.v[i] += G.v[i];
    }
    if (g.needs(row)) {
      Matrix& D = g.grad_of(row);
      for (int i = 0; i < G.rows; ++i)
        for (int j = 0; j < G.cols; ++j) D.v[static_cast<std::size_t>(j)] += G(i, j);
    }
  });
}

Graph::Id Graph::mul(Id a, Id b) {
  require(value(a).same_shape(value(b)), "mul shape mismatch");
  Matrix C = value(a);
  const Matrix& B = value(b);
  for (std::size_t i = 0; i < C.size(); ++i) C.v[i] *= B.v[i];
  return push(std::move(C), needs(a) || needs(b), [a, b](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    if (g.needs(a)) {
      Matrix& D = g.grad_of(a);
      const Matrix& B = g.value(b);
      for (std::size_t i = 0; i < D.size(); ++i) D.v[i] += G.v[i] * B.v[i];
    }
    if (g.needs(b)) {
      Matrix& D = g.grad_of(b);
      const Matrix& A = g.value(a);
      for (std::size_t i = 0; i < D.size(); ++i) D.v[i] += G.v[i] * A.v[i];
    }
  });
}

Graph::Id Graph::scale(Id a, double s) {
  Matrix C = value(a);
  for (double& x : C.v) x *= s;
  return push(std::move(C), needs(a), [a, s](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    Matrix& D = g.grad_of(a);
    for (std::size_t i = 0; i < D.size(); ++i) D.v[i] += s * G.v[i];
  });
}

Graph::Id Graph::add_scalar(Id a, double s) {
  Matrix C = value(a);
  for (double& x : C.v) x += s;
  return push(std::move(C), needs(a), [a](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    Matrix& D = g.grad_of(a);
    for (std::size_t i = 0; i < D.size(); ++i) D.v[i] += G.v[i];
  });
}

Graph::Id Graph::softmax_rows(Id a) {
  Matrix Y = value(a);
  for (int i = 0; i < Y.rows; ++i) {
    double* row = &Y.v[static_cast<std::size_t>(i) * Y.cols];
    const double m = *std::max_element(row, row + Y.cols);
    double s = 0.0;
    for (int j = 0; j < Y.cols; ++j) s += (row[j] = std::exp(row[j] - m));
    for (int j = 0; j < Y.cols; ++j) row[j] /= s;
  }
  return push(std::move(Y), needs(a), [a](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    const Matrix& Y = g.value(self);
    Matrix& D = g.grad_of(a);
    for (int i = 0; i < Y.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < Y.cols; ++j) dot += G(i, j) * Y(i, j);
      for (int j = 0; j < Y.cols; ++j) D(i, j) += Y(i, j) * (G(i, j) - dot);
    }
  });
}

Graph::Id Graph::layer_norm_rows(Id a, Id gamma, Id beta, double eps) {
  const Matrix& X = value(a);
  require(value(gamma).rows == 1 && value(gamma).cols == X.cols, "layer_norm gamma shape");
  require(value(beta).rows == 1 && value(beta).cols == X.cols, "layer_norm beta shape");
  const int n = X.cols;
  Matrix xhat(X.rows, n);
  std::vector<double> inv_std(static_cast<std::size_t>(X.rows));
  for (int i = 0; i < X.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += X(i, j);
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (X(i, j) - mean) * (X(i, j) - mean);
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(i)] = is;
    for (int j = 0; j < n; ++j) xhat(i, j) = (X(i, j) - mean) * is;
  }
  Matrix Y(X.rows, n);
  const Matrix& Gm = value(gamma);
  const Matrix& Bt = value(beta);
  for (int i = 0; i < X.rows; ++i)
    for (int j = 0; j < n; ++j) Y(i, j) = Gm.v[static_cast<std::size_t>(j)] * xhat(i, j) + Bt.v[static_cast<std::size_t>(j)];

  return push(std::move(Y), needs(a) || needs(gamma) || needs(beta),
              [a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, Id self) {
                const Matrix& G = g.node(self).grad;
                const int rows = G.rows;
                const int n = G.cols;
                if (g.needs(gamma) || g.needs(beta)) {
                  for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < n; ++j) {
                      if (g.needs(gamma)) g.grad_of(gamma).v[static_cast<std::size_t>(j)] += G(i, j) * xhat(i, j);
                      if (g.needs(beta)) g.grad_of(beta).v[static_cast<std::size_t>(j)] += G(i, j);
                    }
                  }
                }
                if (g.needs(a)) {
                  const Matrix& Gm = g.value(gamma);
                  Matrix& D = g.grad_of(a);
                  std::vector<double> gx(static_cast<std::size_t>(n));
                  for (int i = 0; i < rows; ++i) {
                    double mean_g = 0.0;
                    double mean_gx = 0.0;
                    for (int j = 0; j < n; ++j) {
                      gx[static_cast<std::size_t>(j)] = G(i, j) * Gm.v[static_cast<std::size_t>(j)];
                      mean_g += gx[static_cast<std::size_t>(j)];
                      mean_gx += gx[static_cast<std::size_t>(j)] * xhat(i, j);
                    }
                    mean_g /= n;
                    mean_gx /= n;
                    const double is = inv_std[static_cast<std::size_t>(i)];
                    for (int j = 0; j < n; ++j)
                      D(i, j) += is * (gx[static_cast<std::size_t>(j)] - mean_g - xhat(i, j) * mean_gx);
                  }
                }
              });
}

Graph::Id Graph::l2_normalize_rows(Id a) {
  Matrix Y = value(a);
  std::vector<double> norms(static_cast<std::size_t>(Y.rows));
  for (int i = 0; i < Y.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < Y.cols; ++j) s += Y(i, j) * Y(i, j);
    const double n = std::sqrt(s);
    require(n > 1e-12, "l2_normalize of a zero row");
    norms[static_cast<std::size_t>(i)] = n;
    for (int j = 0; j < Y.cols; ++j) Y(i, j) /= n;
  }
  return push(std::move(Y), needs(a), [a, norms = std::move(norms)](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    const Matrix& Y = g.value(self);
    Matrix& D = g.grad_of(a);
    for (int i = 0; i < Y.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < Y.cols; ++j) dot += Y(i, j) * G(i, j);
      for (int j = 0; j < Y.cols; ++j) D(i, j) += (G(i, j) - Y(i, j) * dot) / norms[static_cast<std::size_t>(i)];
    }
  });
}

Graph::Id Graph::mean_rows(Id a) {
  const Matrix& X = value(a);
  require(X.rows > 0, "mean_rows of an empty matrix");
  Matrix Y(1, X.cols);
  for (int i = 0; i < X.rows; ++i)
    for (int j = 0; j < X.cols; ++j) Y.v[static_cast<std::size_t>(j)] += X(i, j);
  for (double& y : Y.v) y /= X.rows;
  return push(std::move(Y), needs(a), [a](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    Matrix& D = g.grad_of(a);
    const double inv = 1.0 / D.rows;
    for (int i = 0; i < D.rows; ++i)
      for (int j = 0; j < D.cols; ++j) D(i, j) += G.v[static_cast<std::size_t>(j)] * inv;
  });
}

Graph::Id Graph::concat_cols(std::span<const Id> parts) {
  require(!parts.empty(), "concat of nothing");
  const int rows = value(parts[0]).rows;
  int cols = 0;
  bool any = false;
  for (Id p : parts) {
    require(value(p).rows == rows, "concat row mismatch");
    cols += value(p).cols;
    any = any || needs(p);
  }
  Matrix Y(rows, cols);
  int off = 0;
  for (Id p : parts) {
    const Matrix& X = value(p);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < X.cols; ++j) Y(i, off + j) = X(i, j);
    off += X.cols;
  }
  return push(std::move(Y), any, [ids = std::vector<Id>(parts.begin(), parts.end())](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    int off = 0;
    for (Id p : ids) {
      const int c = g.value(p).cols;
      if (g.needs(p)) {
        Matrix& D = g.grad_of(p);
        for (int i = 0; i < G.rows; ++i)
          for (int j = 0; j < c; ++j) D(i, j) += G(i, off + j);
      }
      off += c;
    }
  });
}

Graph::Id Graph::slice_cols(Id a, int start, int count) {
  const Matrix& X = value(a);
  require(start >= 0 && count > 0 && start + count <= X.cols, "slice out of range");
  Matrix Y(X.rows, count);
  for (int i = 0; i < X.rows; ++i)
    for (int j = 0; j < count; ++j) Y(i, j) = X(i, start + j);
  return push(std::move(Y), needs(a), [a, start, count](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    Matrix& D = g.grad_of(a);
    for (int i = 0; i < G.rows; ++i)
      for (int j = 0; j < count; ++j) D(i, start + j) += G(i, j);
  });
}

Graph::Id Graph::gelu(Id a) {
  Matrix Y = value(a);
  for (double& x : Y.v) {
    const double t = std::tanh(kGeluK * (x + kGeluC * x * x * x));
    x = 0.5 * x * (1.0 + t);
  }
  return push(std::move(Y), needs(a), [a](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    const Matrix& X = g.value(a);
    Matrix& D = g.grad_of(a);
    for (std::size_t i = 0; i < D.size(); ++i) {
      const double x = X.v[i];
      const double t = std::tanh(kGeluK * (x + kGeluC * x * x * x));
      const double dt = (1.0 - t * t) * kGeluK * (1.0 + 3.0 * kGeluC * x * x);
      D.v[i] += G.v[i] * (0.5 * (1.0 + t) + 0.5 * x * dt);
    }
  });
}

Graph::Id Graph::exp(Id a) {
  Matrix Y = value(a);
  for (double& x : Y.v) x = std::exp(x);
  return push(std::move(Y), needs(a), [a](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    const Matrix& Y = g.value(self);
    Matrix& D = g.grad_of(a);
    for (std::size_t i = 0; i < D.size(); ++i) D.v[i] += G.v[i] * Y.v[i];
  });
}

Graph::Id Graph::log(Id a) {
  Matrix Y = value(a);
  for (double& x : Y.v) {
    require(x > 0.0, "log of a non-positive value");
    x = std::log(x);
  }
  return push(std::move(Y), needs(a), [a](Graph& g, Id self) {
    const Matrix& G = g.node(self).grad;
    const Matrix& X = g.value(a);
    Matrix& D = g.grad_of(a);
    for (std::size_t i = 0; i < D.size(); ++i) D.v[i] += G.v[i] / X.v[i];
  });
}

Graph::Id Graph::sum(Id a) {
  Matrix Y(1, 1);
  for (double x : value(a).v) Y.v[0] += x;
  return push(std::move(Y), needs(a), [a](Graph& g, Id self) {
    const double G = g.node(self).grad.v[0];
    Matrix& D = g.grad_of(a);
    for (double& d : D.v) d += G;
  });
}

Graph::Id Graph::squared_error(Id a, const Matrix& target) {
  const Matrix& X = value(a);
  require(X.same_shape(target), "squared_error shape mismatch");
  Matrix Y(1, 1);
  for (std::size_t i = 0; i < X.size(); ++i) Y.v[0] += (X.v[i] - target.v[i]) * (X.v[i] - target.v[i]);
  return push(std::move(Y), needs(a), [a, target](Graph& g, Id self) {
    const double G = g.node(self).grad.v[0];
    const Matrix& X = g.value(a);
    Matrix& D = g.grad_of(a);
    for (std::size_t i = 0; i < D.size(); ++i) D.v[i] += 2.0 * G * (X.v[i] - target.v[i]);
  });
}

Graph::Id Graph::cross_entropy(Id logits, std::span<const int> labels, int classes) {
  const Matrix& Z = value(logits);
  require(classes >= 2 && Z.cols % classes == 0, "cross_entropy class layout");
  const std::size_t pixels = Z.size() / static_cast<std::size_t>(classes);
  require(labels.size() == pixels, "cross_entropy label count");

  // Softmax probabilities are kept for the backward pass.
  Matrix P(static_cast<int>(pixels), classes);
  double loss = 0.0;
  std::size_t counted = 0;
  for (std::size_t k = 0; k < pixels; ++k) {
    const double* z = &Z.v[k * static_cast<std::size_t>(classes)];
    double m = z[0];
    for (int c = 1; c < classes; ++c) m = std::max(m, z[c]);
    double s = 0.0;
    for (int c = 0; c < classes; ++c) s += std::exp(z[c] - m);
    const double lse = m + std::log(s);
    for (int c = 0; c < classes; ++c) P(static_cast<int>(k), c) = std::exp(z[c] - lse);
    const int label = labels[k];
    if (label < 0) continue;
    require(label < classes, "cross_entropy label out of range");
    loss += lse - z[label];
    ++counted;
  }
  Matrix Y(1, 1, counted ? loss / static_cast<double>(counted) : 0.0);
  return push(std::move(Y), needs(logits),
              [logits, classes, counted, P = std::move(P),
               labels = std::vector<int>(labels.begin(), labels.end())](Graph& g, Id self) {
                if (counted == 0) return;
                const double G = g.node(self).grad.v[0] / static_cast<double>(counted);
                Matrix& D = g.grad_of(logits);
                for (std::size_t k = 0; k < labels.size(); ++k) {
                  if (labels[k] < 0) continue;
                  double* d = &D.v[k * static_cast<std::size_t>(classes)];
                  for (int c = 0; c < classes; ++c) d[c] += G * P(static_cast<int>(k), c);
                  d[labels[k]] -= G;
                }
              });
}

void Graph::backward(Id loss) {
  require(value(loss).size() == 1, "backward needs a scalar loss");
  for (auto& n : nodes_) n.grad = Matrix{};
  grad_of(loss).v[0] = 1.0;
  for (Id id = loss; id >= 0; --id) {
    Node& n = node(id);
    if (!n.needs_grad || !n.back || n.grad.size() == 0) continue;
    n.back(*this, id);
  }
}

std::vector<std::pair<int, const Matrix*>> Graph::param_grads() const {
  std::vector<std::pair<int, const Matrix*>> out;
  for (const auto& [id, index] : params_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == n.value.size()) out.emplace_back(index, &n.grad);
  }
  return out;
}

}  // namespace covis::net
