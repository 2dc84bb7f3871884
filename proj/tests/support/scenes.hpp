#pragma once

// Hand-built scenes with closed-form answers.

#include <cstdint>

#include "covis/covisibility.hpp"
#include "covis/synthscene.hpp"

namespace covis::testing {

/// Both cameras at the origin of a fronto-parallel plane scene; camera 1
/// optionally rotated by `yaw_deg` about y.
synth::SceneSpec plane_scene(double depth, double yaw_deg = 0.0);
/// plane_scene with camera 1 translated by `t` instead.
synth::SceneSpec translated_plane_scene(double depth, const Vec3& t);

/// Two cameras on a circle of radius r around the origin, `arc` degrees
/// apart, both looking at a small fronto-parallel target at the origin.
synth::SceneSpec arc_scene(double arc, double r, double half);

/// Background plane at z=5, a 1x1 m slab at z=2 centered on the optical axis
/// of camera 0, camera 1 translated by (baseline, 0, 0).
struct OccluderScene {
  static constexpr double kBackground = 5.0;
  static constexpr double kSlab = 2.0;
  static constexpr double kHalf = 0.5;
  double baseline = 0.5;

  synth::SceneSpec spec() const;
  /// Exact label of the ray through continuous pixel (u, v) of camera 0.
  CovisLabel label(double u, double v) const;
};

struct FootprintBand {
  std::size_t inner = 0;  ///< pixels whose 3x3 neighborhood is entirely occluded
  std::size_t outer = 0;  ///< pixels with any occluded neighbor
};

FootprintBand occluded_footprint(const OccluderScene& s);

/// Fraction of pixels, among those whose 3x3 neighborhood carries one
/// closed-form label, where `map` agrees with the closed form.
double closed_form_agreement(const OccluderScene& s, const CovisMap& map);

struct OracleAgreement {
  std::size_t compared = 0;
  std::size_t agree = 0;
  double rate() const { return compared ? static_cast<double>(agree) / static_cast<double>(compared) : 1.0; }
};

/// annotate_pair vs the ray-cast oracle on non-boundary pixels of one
/// direction.
OracleAgreement oracle_agreement(const synth::SceneSpec& scene, int src_index);

}  // namespace covis::testing
