#pragma once

// Pinhole cameras, rigid transforms and quaternion algebra.
//
// Conventions:
//  * Poses are world-from-camera: X_world = R * X_cam + t.
//  * Quaternions are Hamilton, stored (w, x, y, z), canonical w >= 0.
//  * Pixel (i, j) covers [i, i+1) x [j, j+1) in continuous image
//    coordinates; its center is (i + 0.5, j + 0.5).
//  * Angles are in degrees, lengths in meters.

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace covis {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws ConfigError if the invariants do not hold.
  void validate() const;
  bool operator==(const CameraIntrinsics&) const = default;
};

struct UnitQuaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static UnitQuaternion identity() { return {}; }
  /// Rotation of `angle_deg` about `axis` (need not be unit length).
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle_deg);
  static UnitQuaternion from_matrix(const Mat3& rotation);

  Eigen::Quaterniond eigen() const { return {w, x, y, z}; }
  Mat3 matrix() const { return eigen().toRotationMatrix(); }
  Vec3 rotate(const Vec3& v) const { return eigen() * v; }
  UnitQuaternion conjugate() const { return {w, -x, -y, -z}; }
  std::array<double, 4> wxyz() const { return {w, x, y, z}; }

  bool operator==(const UnitQuaternion&) const = default;
};

/// Normalizes `v` (w, x, y, z) to unit length with w >= 0.
/// Throws DegenerateQuaternion when ||v|| <= 1e-12.
UnitQuaternion quat_normalize(const std::array<double, 4>& v);

/// Hamilton product a*b, renormalized and canonicalized.
UnitQuaternion quat_multiply(const UnitQuaternion& a, const UnitQuaternion& b);

/// Geodesic rotation distance in degrees, in [0, 180]; sign-agnostic.
double quat_geodesic_deg(const UnitQuaternion& a, const UnitQuaternion& b);

struct RigidPose {
  UnitQuaternion rotation;
  Vec3 translation = Vec3::Zero();

  static RigidPose identity() { return {}; }
  Vec3 apply(const Vec3& p) const { return rotation.rotate(p) + translation; }
};

/// (a o b)(X) = a(b(X)).
RigidPose pose_compose(const RigidPose& a, const RigidPose& b);
RigidPose pose_invert(const RigidPose& p);

/// Transform mapping camera-1 coordinates into camera-2 coordinates,
/// frame2^-1 o frame1, for world-from-camera poses.
RigidPose relative_pose(const RigidPose& frame1, const RigidPose& frame2);

inline Vec3 camera_center(const RigidPose& world_from_cam) { return world_from_cam.translation; }

inline constexpr double kBehindCameraZ = 1e-9;

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Projects a camera-frame point; nullopt when z <= 1e-9 (behind camera).
std::optional<Projection> project(const CameraIntrinsics& K, const Vec3& X);

/// Inverse of project for d > 0. Throws InvalidDepth otherwise.
Vec3 unproject(const CameraIntrinsics& K, double u, double v, double d);

/// Dense depth raster, row-major. Non-positive or non-finite values are invalid.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  double& at(int x, int y) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  bool valid(int x, int y) const { return is_valid_depth(at(x, y)); }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  static bool is_valid_depth(double d);

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

struct CameraFrame {
  CameraIntrinsics intrinsics;
  RigidPose pose;
  DepthMap depth;

  /// Throws ConfigError when depth and intrinsics dimensions disagree.
  void validate() const;
};

/// Angle between two vectors in degrees, computed with atan2 so that
/// parallel inputs give exactly 0.
double angle_between_deg(const Vec3& a, const Vec3& b);

}  // namespace covis
