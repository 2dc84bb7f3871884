#pragma once

// Segmentation, pose and joint objectives. Uncertainty terms are
// log-variances s = 2 log(sigma).

#include <array>
#include <span>
#include <vector>

#include "covis/geom3d.hpp"
#include "covis/net/graph.hpp"

namespace covis::net {

/// -(1/N) sum ln probs[label] over pixels with label >= 0. `probs` holds
/// `classes` values per pixel. Zero labelled pixels give 0.
double cross_entropy(std::span<const double> probs, std::span<const int> labels, int classes);

/// 1/2 e^{-s_t} |t - t_hat|^2 + 1/2 e^{-s_q} |q - q_hat|^2 + s_t/2 + s_q/2
double pose_loss(const std::array<double, 3>& t, const std::array<double, 4>& q, const std::array<double, 3>& t_hat,
                 const std::array<double, 4>& q_hat, double s_t, double s_q);

/// L_pose + 1/2 e^{-s_seg} L_ce + s_seg/2
double joint_loss(double l_pose, double l_ce, double s_seg);

/// GT target for the pose head: translation and canonical (w >= 0) wxyz
/// quaternion of `rel`.
struct PoseTarget {
  Matrix t;  ///< 1 x 3
  Matrix q;  ///< 1 x 4
};
PoseTarget pose_target(const RigidPose& rel);

/// Graph versions; all return 1 x 1 nodes.
Graph::Id pose_loss(Graph& g, Graph::Id t_hat, Graph::Id q_hat, const PoseTarget& target, Graph::Id s_t,
                    Graph::Id s_q, bool align_sign = false);
Graph::Id joint_loss(Graph& g, Graph::Id l_pose, Graph::Id l_ce, Graph::Id s_seg);

}  // namespace covis::net
