#pragma once

// Central finite-difference check of every parameter gradient of L_ce,
// L_pose and L_joint.

#include <array>
#include <string>

#include "covis/net/train.hpp"

namespace covis::testing {

struct GradCheckResult {
  std::array<double, 3> max_rel{};  ///< ce, pose, joint
  std::array<std::string, 3> worst{};
  std::size_t checked = 0;
  double seconds = 0.0;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, floor), maximized over
/// all scalars. Perturbed forwards restart from cached encoder or decoder
/// outputs when the parameter only affects later stages.
GradCheckResult gradient_check(const net::ModelParameters& params, const net::PairSample& sample, double h,
                               double floor);

/// Shift-task pair with a pose target and nonzero log-variances.
net::PairSample gradcheck_sample(const net::ModelConfig& cfg, std::uint64_t seed);
net::ModelParameters gradcheck_model(const net::ModelConfig& cfg, std::uint64_t seed);

}  // namespace covis::testing
