#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "covis/net/graph.hpp"

using namespace covis::net;

namespace {

using Builder = std::function<Graph::Id(Graph&, const std::vector<Graph::Id>&)>;

Matrix random_matrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (double& x : m.v) x = n(rng);
  return m;
}

// Projects the op output onto fixed random weights so every output entry
// contributes to the scalar.
Graph::Id project(Graph& g, Graph::Id out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Matrix& v = g.value(out);
  return g.sum(g.mul(out, g.constant(random_matrix(v.rows, v.cols, rng))));
}

double evaluate(const Builder& f, const std::vector<Matrix>& inputs) {
  Graph g;
  std::vector<Graph::Id> ids;
  for (std::size_t i = 0; i < inputs.size(); ++i) ids.push_back(g.parameter(inputs[i], static_cast<int>(i)));
  return g.scalar(project(g, f(g, ids), 99));
}

// Max relative error between analytic and central-difference gradients.
double check(const Builder& f, std::vector<Matrix> inputs, double h = 1e-6) {
  Graph g;
  std::vector<Graph::Id> ids;
  for (std::size_t i = 0; i < inputs.size(); ++i) ids.push_back(g.parameter(inputs[i], static_cast<int>(i)));
  g.backward(project(g, f(g, ids), 99));
  std::vector<Matrix> analytic;
  for (const auto& m : inputs) analytic.emplace_back(m.rows, m.cols, 0.0);
  for (const auto& [idx, grad] : g.param_grads()) analytic[static_cast<std::size_t>(idx)] = *grad;

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (std::size_t k = 0; k < inputs[i].v.size(); ++k) {
      const double x = inputs[i].v[k];
      inputs[i].v[k] = x + h;
      const double up = evaluate(f, inputs);
      inputs[i].v[k] = x - h;
      const double down = evaluate(f, inputs);
      inputs[i].v[k] = x;
      const double num = (up - down) / (2 * h);
      const double a = analytic[i].v[k];
      worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-6}));
    }
  return worst;
}

class GraphOps : public ::testing::Test {
 protected:
  std::mt19937_64 rng{7};
  Matrix m(int r, int c, double s = 1.0) { return random_matrix(r, c, rng, s); }
};

}  // namespace

TEST_F(GraphOps, MatmulVariants) {
  EXPECT_LT(check([](Graph& g, auto& x) { return g.matmul(x[0], x[1]); }, {m(3, 4), m(4, 5)}), 1e-7);
  EXPECT_LT(check([](Graph& g, auto& x) { return g.matmul_bt(x[0], x[1]); }, {m(3, 4), m(5, 4)}), 1e-7);
}

TEST_F(GraphOps, Elementwise) {
  EXPECT_LT(check([](Graph& g, auto& x) { return g.add(x[0], x[1]); }, {m(2, 3), m(2, 3)}), 1e-7);
  EXPECT_LT(check([](Graph& g, auto& x) { return g.sub(x[0], x[1]); }, {m(2, 3), m(2, 3)}), 1e-7);
  EXPECT_LT(check([](Graph& g, auto& x) { return g.mul(x[0], x[1]); }, {m(2, 3), m(2, 3)}), 1e-7);
  EXPECT_LT(check([](Graph& g, auto& x) { return g.add_row(x[0], x[1]); }, {m(4, 3), m(1, 3)}), 1e-7);
  EXPECT_LT(check([](Graph& g, auto& x) { return g.scale(x[0], -1.7); }, {m(2, 2)}), 1e-7);
  EXPECT_LT(check([](Graph& g, auto& x) { return g.add_scalar(x[0], 0.3); }, {m(2, 2)}), 1e-7);
}

TEST_F(GraphOps, Pointwise) {
  EXPECT_LT(check([](Graph& g, auto& x) { return g.gelu(x[0]); }, {m(3, 5, 2.0)}), 1e-6);
  EXPECT_LT(check([](Graph& g, auto& x) { return g.exp(x[0]); }, {m(3, 2)}), 1e-7);
  Matrix pos = m(3, 2);
  for (double& v : pos.v) v = std::abs(v) + 0.5;
  EXPECT_LT(check([](Graph& g, auto& x) { return g.log(x[0]); }, {pos}), 1e-7);
}

TEST_F(GraphOps, RowOps) {
  EXPECT_LT(check([](Graph& g, auto& x) { return g.softmax_rows(x[0]); }, {m(3, 6)}), 1e-6);
  EXPECT_LT(check([](Graph& g, auto& x) { return g.layer_norm_rows(x[0], x[1], x[2]); }, {m(4, 6), m(1, 6), m(1, 6)}),
            1e-5);
  EXPECT_LT(check([](Graph& g, auto& x) { return g.l2_normalize_rows(x[0]); }, {m(3, 4)}), 1e-6);
  EXPECT_LT(check([](Graph& g, auto& x) { return g.mean_rows(x[0]); }, {m(5, 3)}), 1e-7);
  EXPECT_LT(check([](Graph& g, auto& x) {
              const Graph::Id parts[] = {x[0], x[1], x[0]};
              return g.concat_cols(parts);
            },
            {m(3, 2), m(3, 4)}),
            1e-7);
  EXPECT_LT(check([](Graph& g, auto& x) { return g.slice_cols(x[0], 1, 3); }, {m(3, 5)}), 1e-7);
}

TEST_F(GraphOps, Losses) {
  const Matrix target = m(2, 3);
  EXPECT_LT(check([&](Graph& g, auto& x) { return g.squared_error(x[0], target); }, {m(2, 3)}), 1e-7);
  const std::vector<int> labels{0, 2, -1, 1, 1, 0};  // 2 tokens x 3 pixels, 3 classes
  EXPECT_LT(check([&](Graph& g, auto& x) { return g.cross_entropy(x[0], labels, 3); }, {m(2, 9)}), 1e-6);
}

TEST(GraphValues, SoftmaxShiftInvariance) {
  std::mt19937_64 rng(2);
  Matrix a = random_matrix(4, 3, rng);
  Matrix b = a;
  for (double& v : b.v) v += 12.5;
  Graph g;
  const auto& pa = g.value(g.softmax_rows(g.constant(a)));
  const auto& pb = g.value(g.softmax_rows(g.constant(b)));
  for (std::size_t i = 0; i < pa.v.size(); ++i) EXPECT_NEAR(pa.v[i], pb.v[i], 1e-9);
  for (int r = 0; r < 4; ++r) EXPECT_NEAR(pa(r, 0) + pa(r, 1) + pa(r, 2), 1.0, 1e-12);
}

TEST(GraphValues, UniformCrossEntropyGradient) {
  // Zero logits: loss ln 3 and gradient (1/3 - onehot) / N per entry.
  Graph g;
  const Graph::Id z = g.parameter(Matrix(2, 6, 0.0), 0);
  const std::vector<int> labels{0, 2, 1, -1};
  const Graph::Id l = g.cross_entropy(z, labels, 3);
  EXPECT_NEAR(g.scalar(l), std::log(3.0), 1e-12);
  g.backward(l);
  const Matrix& grad = *g.param_grads().at(0).second;
  for (int px = 0; px < 4; ++px)
    for (int c = 0; c < 3; ++c) {
      const double expected = labels[static_cast<std::size_t>(px)] < 0 ? 0.0
                              : (1.0 / 3.0 - (c == labels[static_cast<std::size_t>(px)])) / 3.0;
      EXPECT_NEAR(grad.v[static_cast<std::size_t>(px * 3 + c)], expected, 1e-12);
    }
}

TEST(GraphValues, CrossEntropyAllIgnoredIsZero) {
  Graph g;
  const Graph::Id z = g.parameter(Matrix(1, 6, 1.0), 0);
  const std::vector<int> labels{-1, -1};
  EXPECT_EQ(g.scalar(g.cross_entropy(z, labels, 3)), 0.0);
}

TEST(GraphValues, GeluTanhForm) {
  Graph g;
  Matrix x(1, 3);
  x.v = {-1.0, 0.0, 2.0};
  const auto& y = g.value(g.gelu(g.constant(x)));
  for (int i = 0; i < 3; ++i) {
    const double v = x.v[static_cast<std::size_t>(i)];
    const double ref = 0.5 * v * (1 + std::tanh(std::sqrt(2 / M_PI) * (v + 0.044715 * v * v * v)));
    EXPECT_NEAR(y.v[static_cast<std::size_t>(i)], ref, 1e-15);
  }
}

TEST(GraphValues, FrozenLeavesReportNoGradient) {
  Graph g;
  const Graph::Id a = g.parameter(Matrix(1, 2, 1.0), 0, false);
  const Graph::Id b = g.parameter(Matrix(1, 2, 2.0), 1, true);
  g.backward(g.sum(g.mul(a, b)));
  const auto grads = g.param_grads();
  ASSERT_EQ(grads.size(), 1u);
  EXPECT_EQ(grads[0].first, 1);
  EXPECT_EQ(grads[0].second->v, (std::vector<double>{1.0, 1.0}));
}

TEST(GraphValues, BackwardIsRepeatable) {
  Graph g;
  const Graph::Id a = g.parameter(Matrix(1, 2, 3.0), 0);
  const Graph::Id l1 = g.sum(g.mul(a, a));
  const Graph::Id l2 = g.sum(a);
  g.backward(l1);
  EXPECT_EQ(g.param_grads()[0].second->v, (std::vector<double>{6.0, 6.0}));
  g.backward(l2);
  EXPECT_EQ(g.param_grads()[0].second->v, (std::vector<double>{1.0, 1.0}));
}
