#include "covis/synthscene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "covis/errors.hpp"

namespace covis::synth {

Primitive Primitive::rect(int normal_axis, double position, const Vec3& lo, const Vec3& hi) {
  Primitive p{lo, hi};
  p.lo[normal_axis] = position;
  p.hi[normal_axis] = position;
  return p;
}

Primitive Primitive::box(const Vec3& lo, const Vec3& hi) { return {lo, hi}; }

bool Primitive::is_flat() const { return lo.x() == hi.x() || lo.y() == hi.y() || lo.z() == hi.z(); }

bool Primitive::contains(const Vec3& p) const {
  return (p.array() > lo.array()).all() && (p.array() < hi.array()).all();
}

CameraIntrinsics default_intrinsics() { return {80.0, 80.0, 48.0, 36.0, 96, 72}; }

void SceneSpec::validate() const {
  if (primitives.empty()) throw ConfigError("scene has no primitives");
  for (const auto& cam : cameras) {
    cam.intrinsics.validate();
    for (const auto& prim : primitives)
      if (prim.contains(cam.pose.translation)) throw ConfigError("camera lies inside a primitive");
  }
}

std::optional<Hit> cast_ray(const std::vector<Primitive>& prims, const Vec3& origin, const Vec3& dir,
                            double t_min) {
  std::optional<Hit> best;
  for (int i = 0; i < static_cast<int>(prims.size()); ++i) {
    const Primitive& prim = prims[static_cast<std::size_t>(i)];
    for (int axis = 0; axis < 3; ++axis) {
      if (dir[axis] == 0.0) continue;
      const bool flat = prim.lo[axis] == prim.hi[axis];
      for (int side = 0; side < (flat ? 1 : 2); ++side) {
        const double plane = side ? prim.hi[axis] : prim.lo[axis];
        const double t = (plane - origin[axis]) / dir[axis];
        if (!(t > t_min)) continue;
        if (best && t >= best->t) continue;
        Vec3 p = origin + t * dir;
        p[axis] = plane;
        const int a1 = (axis + 1) % 3;
        const int a2 = (axis + 2) % 3;
        if (p[a1] < prim.lo[a1] || p[a1] > prim.hi[a1] || p[a2] < prim.lo[a2] || p[a2] > prim.hi[a2])
          continue;
        best = Hit{t, i, i * 6 + axis * 2 + side, p};
      }
    }
  }
  return best;
}

namespace {

Vec3 pixel_direction_cam(const CameraIntrinsics& K, double u, double v) {
  return {(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0};
}

int face_at(const std::vector<Primitive>& prims, const CameraPlacement& cam, double u, double v) {
  const auto hit = cast_pixel(prims, cam, u, v);
  return hit ? hit->face : -1;
}

bool inside_image(const CameraIntrinsics& K, double u, double v) {
  return u >= 0.0 && u < K.width && v >= 0.0 && v < K.height;
}

struct PixelTruth {
  CovisLabel label = CovisLabel::Ignore;
  double depth = -1.0;
  bool boundary = false;
};

PixelTruth classify_exact(const SceneSpec& scene, int src_index, int x, int y, bool with_boundary) {
  const auto& prims = scene.primitives;
  const CameraPlacement& src = scene.cameras[static_cast<std::size_t>(src_index)];
  const CameraPlacement& tgt = scene.cameras[static_cast<std::size_t>(1 - src_index)];
  const double u = x + 0.5;
  const double v = y + 0.5;

  PixelTruth out;
  const auto hit = cast_pixel(prims, src, u, v);
  if (with_boundary) {
    const int face = hit ? hit->face : -1;
    for (int dy = -1; dy <= 1 && !out.boundary; ++dy)
      for (int dx = -1; dx <= 1 && !out.boundary; ++dx)
        if ((dx || dy) && face_at(prims, src, u + dx, v + dy) != face) out.boundary = true;
  }
  if (!hit) return out;
  out.depth = hit->t;

  const Vec3 p_tgt = pose_invert(tgt.pose).apply(hit->point);
  const auto proj = project(tgt.intrinsics, p_tgt);
  if (!proj || !inside_image(tgt.intrinsics, proj->u, proj->v)) {
    out.label = CovisLabel::OutsideFov;
    if (with_boundary && proj) {
      const auto& K = tgt.intrinsics;
      if (proj->u > -1.0 && proj->u < K.width + 1.0 && proj->v > -1.0 && proj->v < K.height + 1.0)
        out.boundary = true;
    }
    return out;
  }

  const Vec3 center = tgt.pose.translation;
  const Vec3 to_point = hit->point - center;
  const double dist = to_point.norm();
  const auto first = cast_ray(prims, center, to_point / dist);
  out.label = (first && first->t < dist - 1e-9) ? CovisLabel::Occluded : CovisLabel::Covisible;

  if (with_boundary && !out.boundary) {
    const auto& K = tgt.intrinsics;
    if (proj->u < 1.0 || proj->u > K.width - 1.0 || proj->v < 1.0 || proj->v > K.height - 1.0) {
      out.boundary = true;
    } else {
      const int face = face_at(prims, tgt, proj->u, proj->v);
      for (int dy = -1; dy <= 1 && !out.boundary; ++dy)
        for (int dx = -1; dx <= 1 && !out.boundary; ++dx)
          if ((dx || dy) && face_at(prims, tgt, proj->u + dx, proj->v + dy) != face) out.boundary = true;
    }
  }
  return out;
}

}  // namespace

std::optional<Hit> cast_pixel(const std::vector<Primitive>& prims, const CameraPlacement& cam, double u,
                              double v) {
  const Vec3 dir = cam.pose.rotation.rotate(pixel_direction_cam(cam.intrinsics, u, v));
  return cast_ray(prims, cam.pose.translation, dir);
}

DepthMap render_depth(const std::vector<Primitive>& prims, const CameraPlacement& cam) {
  const auto& K = cam.intrinsics;
  DepthMap depth(K.width, K.height, 0.0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const auto hit = cast_pixel(prims, cam, x + 0.5, y + 0.5);
      depth.values()[static_cast<std::size_t>(y) * K.width + x] = hit ? hit->t : 0.0;
    }
  }
  return depth;
}

DepthMap render_depth(const SceneSpec& scene, int cam_index) {
  return render_depth(scene.primitives, scene.cameras.at(static_cast<std::size_t>(cam_index)));
}

CameraFrame make_frame(const SceneSpec& scene, int cam_index) {
  const auto& cam = scene.cameras.at(static_cast<std::size_t>(cam_index));
  return {cam.intrinsics, cam.pose, render_depth(scene, cam_index)};
}

ColorImage render_color(const std::vector<Primitive>& prims, const CameraPlacement& cam, double checker_size) {
  static constexpr std::array<std::array<double, 3>, 8> kPalette{{
      {0.85, 0.35, 0.30},
      {0.30, 0.70, 0.40},
      {0.30, 0.45, 0.85},
      {0.90, 0.80, 0.30},
      {0.70, 0.35, 0.80},
      {0.30, 0.80, 0.80},
      {0.95, 0.60, 0.25},
      {0.60, 0.60, 0.60},
  }};
  const auto& K = cam.intrinsics;
  ColorImage img{K.width, K.height, std::vector<double>(3 * static_cast<std::size_t>(K.width) * K.height, 0.0)};
  const std::size_t plane = static_cast<std::size_t>(K.width) * K.height;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const auto hit = cast_pixel(prims, cam, x + 0.5, y + 0.5);
      if (!hit) continue;
      const auto& base = kPalette[static_cast<std::size_t>(hit->face) % kPalette.size()];
      const Vec3 q = hit->point / checker_size;
      const long parity = static_cast<long>(std::floor(q.x())) + static_cast<long>(std::floor(q.y())) +
                          static_cast<long>(std::floor(q.z()));
      const double shade = (parity % 2 == 0) ? 1.0 : 0.55;
      const std::size_t idx = static_cast<std::size_t>(y) * K.width + x;
      for (int c = 0; c < 3; ++c) img.data[c * plane + idx] = base[static_cast<std::size_t>(c)] * shade;
    }
  }
  return img;
}

OracleMap oracle_classify(const SceneSpec& scene, int src_index) {
  if (src_index != 0 && src_index != 1) throw UsageError("oracle_classify: camera index must be 0 or 1");
  scene.validate();
  const auto& K = scene.cameras[static_cast<std::size_t>(src_index)].intrinsics;
  OracleMap out{CovisMap(K.width, K.height), std::vector<double>(static_cast<std::size_t>(K.width) * K.height),
                std::vector<std::uint8_t>(static_cast<std::size_t>(K.width) * K.height)};
  auto labels = out.labels.labels();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const PixelTruth t = classify_exact(scene, src_index, x, y, true);
      const std::size_t idx = static_cast<std::size_t>(y) * K.width + x;
      labels[idx] = t.label;
      out.source_depth[idx] = t.depth;
      out.boundary[idx] = t.boundary ? 1 : 0;
    }
  }
  return out;
}

namespace {

bool has_covisible_pixel(const SceneSpec& scene) {
  const auto& K = scene.cameras[0].intrinsics;
  for (int y = 1; y < K.height; y += 3)
    for (int x = 1; x < K.width; x += 3)
      if (classify_exact(scene, 0, x, y, false).label == CovisLabel::Covisible) return true;
  return false;
}

}  // namespace

SceneSpec sample_scene(std::uint64_t seed, const CameraIntrinsics& K) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto coin = [&](double p) { return uniform(0.0, 1.0) < p; };

  SceneSpec scene;
  scene.seed = seed;

  // Camera 0 is the world origin looking down +z with y pointing down.
  const double back = uniform(4.0, 8.0);
  const double floor_y = uniform(1.2, 1.8);
  scene.primitives.push_back(Primitive::rect(2, back, {-15.0, -6.0, 0.0}, {15.0, floor_y, 0.0}));

  const int extras = std::uniform_int_distribution<int>(0, 3)(rng);
  for (int i = 0; i < extras; ++i) {
    const double kind = uniform(0.0, 1.0);
    if (kind < 0.6) {
      Vec3 c, half;
      c.x() = uniform(-2.0, 2.0);
      c.y() = uniform(-1.0, 1.0);
      c.z() = uniform(1.5, back - 1.0);
      half.x() = uniform(0.15, 0.75);
      half.y() = uniform(0.15, 0.75);
      half.z() = uniform(0.05, 0.5);
      scene.primitives.push_back(Primitive::box(c - half, c + half));
    } else if (kind < 0.8) {
      scene.primitives.push_back(Primitive::rect(1, floor_y, {-15.0, 0.0, -3.0}, {15.0, 0.0, back}));
    } else {
      const double side = (coin(0.5) ? 1.0 : -1.0) * uniform(2.5, 5.0);
      scene.primitives.push_back(Primitive::rect(0, side, {0.0, -6.0, -3.0}, {0.0, floor_y, back}));
    }
  }

  scene.cameras[0] = {K, RigidPose::identity()};
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double baseline = uniform(0.1, 2.0);
    Vec3 dir;
    dir.x() = uniform(-1.0, 1.0);
    dir.y() = uniform(-0.2, 0.2);
    dir.z() = uniform(-1.0, 1.0);
    const Vec3 center = baseline * dir.normalized();
    // Turn toward the scene: a camera displaced to +x yaws left.
    const double sign = center.x() > 0.0 ? -1.0 : 1.0;
    const double yaw = sign * uniform(0.0, 150.0);
    const double pitch = uniform(-5.0, 5.0);
    const double roll = uniform(-5.0, 5.0);
    const UnitQuaternion rot =
        quat_multiply(UnitQuaternion::from_axis_angle(Vec3::UnitY(), yaw),
                      quat_multiply(UnitQuaternion::from_axis_angle(Vec3::UnitX(), pitch),
                                    UnitQuaternion::from_axis_angle(Vec3::UnitZ(), roll)));
    scene.cameras[1] = {K, RigidPose{rot, center}};

    bool inside = false;
    for (const auto& prim : scene.primitives) inside = inside || prim.contains(center);
    if (inside) continue;
    if (has_covisible_pixel(scene)) return scene;
  }
  throw Error("sample_scene: no covisible camera placement after 100 attempts (seed " + std::to_string(seed) +
              ")");
}

}  // namespace covis::synth
