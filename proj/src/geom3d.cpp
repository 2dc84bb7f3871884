#include "covis/geom3d.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "covis/errors.hpp"

namespace covis {

namespace {
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kDegToRad = std::numbers::pi / 180.0;
}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw ConfigError("intrinsics: principal point outside the image");
}

UnitQuaternion quat_normalize(const std::array<double, 4>& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
  if (!(n > 1e-12)) throw DegenerateQuaternion("quaternion norm " + std::to_string(n) + " is degenerate");
  const double s = (v[0] < 0.0 ? -1.0 : 1.0) / n;
  return {v[0] * s, v[1] * s, v[2] * s, v[3] * s};
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle_deg) {
  const Eigen::AngleAxisd aa(angle_deg * kDegToRad, axis.normalized());
  const Eigen::Quaterniond q(aa);
  return quat_normalize({q.w(), q.x(), q.y(), q.z()});
}

UnitQuaternion UnitQuaternion::from_matrix(const Mat3& rotation) {
  const Eigen::Quaterniond q(rotation);
  return quat_normalize({q.w(), q.x(), q.y(), q.z()});
}

UnitQuaternion quat_multiply(const UnitQuaternion& a, const UnitQuaternion& b) {
  const Eigen::Quaterniond q = a.eigen() * b.eigen();
  return quat_normalize({q.w(), q.x(), q.y(), q.z()});
}

double quat_geodesic_deg(const UnitQuaternion& a, const UnitQuaternion& b) {
  const Eigen::Quaterniond r = a.eigen().conjugate() * b.eigen();
  return 2.0 * std::atan2(r.vec().norm(), std::abs(r.w())) * kRadToDeg;
}

RigidPose pose_compose(const RigidPose& a, const RigidPose& b) {
  return {quat_multiply(a.rotation, b.rotation), a.rotation.rotate(b.translation) + a.translation};
}

RigidPose pose_invert(const RigidPose& p) {
  const UnitQuaternion r = quat_normalize(p.rotation.conjugate().wxyz());
  return {r, -r.rotate(p.translation)};
}

RigidPose relative_pose(const RigidPose& frame1, const RigidPose& frame2) {
  return pose_compose(pose_invert(frame2), frame1);
}

std::optional<Projection> project(const CameraIntrinsics& K, const Vec3& X) {
  if (X.z() <= kBehindCameraZ) return std::nullopt;
  return Projection{K.fx * X.x() / X.z() + K.cx, K.fy * X.y() / X.z() + K.cy, X.z()};
}

Vec3 unproject(const CameraIntrinsics& K, double u, double v, double d) {
  if (!(d > 0.0)) throw InvalidDepth("unproject: depth must be positive");
  return {(u - K.cx) / K.fx * d, (v - K.cy) / K.fy * d, d};
}

DepthMap::DepthMap(int width, int height, double fill)
    : width_(width), height_(height), values_(static_cast<std::size_t>(width) * height, fill) {
  if (width < 0 || height < 0) throw ConfigError("depth map: negative size");
}

bool DepthMap::is_valid_depth(double d) { return std::isfinite(d) && d > 0.0; }

void CameraFrame::validate() const {
  intrinsics.validate();
  if (depth.width() != intrinsics.width || depth.height() != intrinsics.height)
    throw ConfigError("camera frame: depth is " + std::to_string(depth.width()) + "x" +
                      std::to_string(depth.height()) + " but intrinsics are " +
                      std::to_string(intrinsics.width) + "x" + std::to_string(intrinsics.height));
}

double angle_between_deg(const Vec3& a, const Vec3& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  const Vec3 ua = a / na;
  const Vec3 ub = b / nb;
  return 2.0 * std::atan2((ua - ub).norm(), (ua + ub).norm()) * kRadToDeg;
}

}  // namespace covis
