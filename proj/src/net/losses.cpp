#include "covis/net/losses.hpp"

#include <cmath>

#include "covis/errors.hpp"

namespace covis::net {

double cross_entropy(std::span<const double> probs, std::span<const int> labels, int classes) {
  if (classes < 2 || probs.size() != labels.size() * static_cast<std::size_t>(classes))
    throw ConfigError("cross_entropy: probabilities and labels disagree in size");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] < 0) continue;
    if (labels[k] >= classes) throw ConfigError("cross_entropy: label out of range");
    sum -= std::log(probs[k * static_cast<std::size_t>(classes) + static_cast<std::size_t>(labels[k])]);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double pose_loss(const std::array<double, 3>& t, const std::array<double, 4>& q, const std::array<double, 3>& t_hat,
                 const std::array<double, 4>& q_hat, double s_t, double s_q) {
  double rt = 0.0;
  double rq = 0.0;
  for (int i = 0; i < 3; ++i) rt += (t[i] - t_hat[i]) * (t[i] - t_hat[i]);
  for (int i = 0; i < 4; ++i) rq += (q[i] - q_hat[i]) * (q[i] - q_hat[i]);
  return 0.5 * std::exp(-s_t) * rt + 0.5 * std::exp(-s_q) * rq + 0.5 * s_t + 0.5 * s_q;
}

double joint_loss(double l_pose, double l_ce, double s_seg) {
  return l_pose + 0.5 * std::exp(-s_seg) * l_ce + 0.5 * s_seg;
}

PoseTarget pose_target(const RigidPose& rel) {
  PoseTarget out{Matrix(1, 3), Matrix(1, 4)};
  for (int i = 0; i < 3; ++i) out.t.v[static_cast<std::size_t>(i)] = rel.translation[i];
  const auto q = quat_normalize(rel.rotation.wxyz()).wxyz();
  for (int i = 0; i < 4; ++i) out.q.v[static_cast<std::size_t>(i)] = q[static_cast<std::size_t>(i)];
  return out;
}

namespace {

// 1/2 e^{-s} r + s/2
Graph::Id weighted(Graph& g, Graph::Id r, Graph::Id s) {
  const Graph::Id data = g.scale(g.mul(g.exp(g.scale(s, -1.0)), r), 0.5);
  return g.add(data, g.scale(s, 0.5));
}

}  // namespace

Graph::Id pose_loss(Graph& g, Graph::Id t_hat, Graph::Id q_hat, const PoseTarget& target, Graph::Id s_t,
                    Graph::Id s_q, bool align_sign) {
  Matrix q = target.q;
  if (align_sign) {
    double dot = 0.0;
    for (int i = 0; i < 4; ++i) dot += q.v[static_cast<std::size_t>(i)] * g.value(q_hat).v[static_cast<std::size_t>(i)];
    if (dot < 0.0)
      for (double& x : q.v) x = -x;
  }
  const Graph::Id lt = weighted(g, g.squared_error(t_hat, target.t), s_t);
  const Graph::Id lq = weighted(g, g.squared_error(q_hat, q), s_q);
  return g.add(lt, lq);
}

Graph::Id joint_loss(Graph& g, Graph::Id l_pose, Graph::Id l_ce, Graph::Id s_seg) {
  return g.add(l_pose, weighted(g, l_ce, s_seg));
}

}  // namespace covis::net
