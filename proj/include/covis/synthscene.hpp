#pragma once

// Procedural scenes made of axis-aligned rectangles and boxes. Ray
// intersections are closed form, which makes the ray-cast classifier here an
// exact ground truth for the depth-based annotator.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "covis/covisibility.hpp"
#include "covis/geom3d.hpp"

namespace covis::synth {

/// Axis-aligned box [lo, hi]. A zero extent along one axis makes it a
/// double-sided rectangle.
struct Primitive {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  static Primitive rect(int normal_axis, double position, const Vec3& lo, const Vec3& hi);
  static Primitive box(const Vec3& lo, const Vec3& hi);

  bool is_flat() const;
  /// Strict interior test; flat primitives have no interior.
  bool contains(const Vec3& p) const;
};

/// 96x72 pinhole camera, f = 80 px, principal point at the image center.
CameraIntrinsics default_intrinsics();

struct CameraPlacement {
  CameraIntrinsics intrinsics;
  RigidPose pose;  ///< world-from-camera
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  std::array<CameraPlacement, 2> cameras;
  std::uint64_t seed = 0;

  /// Throws ConfigError without primitives or with a camera inside one.
  void validate() const;
};

struct Hit {
  double t = 0.0;  ///< ray parameter; optical-axis depth for camera rays
  int primitive = -1;
  int face = -1;   ///< primitive * 6 + axis * 2 + side (side 0 for flat faces)
  Vec3 point = Vec3::Zero();
};

/// Nearest intersection with t > t_min along origin + t * dir.
std::optional<Hit> cast_ray(const std::vector<Primitive>& prims, const Vec3& origin, const Vec3& dir,
                            double t_min = 0.0);

/// Camera ray through continuous pixel coordinates (u, v). The direction has
/// unit z in camera coordinates so the hit parameter is the depth.
std::optional<Hit> cast_pixel(const std::vector<Primitive>& prims, const CameraPlacement& cam, double u,
                              double v);

DepthMap render_depth(const std::vector<Primitive>& prims, const CameraPlacement& cam);
DepthMap render_depth(const SceneSpec& scene, int cam_index);

CameraFrame make_frame(const SceneSpec& scene, int cam_index);

/// Planar RGB image, channel-major (3 x H x W), values in [0, 1]. Each face
/// gets a base color modulated by a world-space checker; misses are black.
struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;
  double at(int c, int x, int y) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

ColorImage render_color(const std::vector<Primitive>& prims, const CameraPlacement& cam,
                        double checker_size = 0.5);

struct OracleMap {
  CovisMap labels;
  std::vector<double> source_depth;    ///< exact hit depth, <= 0 where the ray misses
  std::vector<std::uint8_t> boundary;  ///< 1 where the pixel is within 1 px of an edge in either view
};

/// Exact ray-cast classification of camera `src_index` against the other camera.
OracleMap oracle_classify(const SceneSpec& scene, int src_index);

/// Deterministic random scene: 1-4 primitives, baseline 0.1-2 m, relative
/// yaw 0-150 deg. Camera placements are resampled (up to 100 attempts) until
/// the oracle finds at least one covisible pixel.
SceneSpec sample_scene(std::uint64_t seed, const CameraIntrinsics& K = default_intrinsics());

}  // namespace covis::synth
