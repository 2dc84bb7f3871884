#include "covis/covisibility.hpp"

#include <algorithm>
#include <cmath>

#include "covis/errors.hpp"

namespace covis {

bool is_valid_label_value(std::uint8_t v) { return v <= 2 || v == 255; }

int class_count(ClassScheme scheme) { return scheme == ClassScheme::ThreeClass ? 3 : 2; }

namespace {

std::size_t checked_area(int width, int height) {
  if (width < 0 || height < 0) throw ConfigError("covis map: negative size");
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace

CovisMap::CovisMap(int width, int height, CovisLabel fill)
    : width_(width), height_(height), labels_(checked_area(width, height), fill) {}

std::size_t CovisMap::count(CovisLabel label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

std::size_t CovisMap::labelled_count() const { return labels_.size() - count(CovisLabel::Ignore); }

bool CovisMap::same_labels(const CovisMap& other) const {
  return width_ == other.width_ && height_ == other.height_ && scheme == other.scheme &&
         labels_ == other.labels_;
}

double sample_depth_bilinear(const DepthMap& depth, double u, double v) {
  // Sample grid sits at pixel centers.
  const double gx = u - 0.5;
  const double gy = v - 0.5;
  const int x0 = static_cast<int>(std::floor(gx));
  const int y0 = static_cast<int>(std::floor(gy));
  const double ax = gx - x0;
  const double ay = gy - y0;

  double acc = 0.0;
  double wsum = 0.0;
  double plain = 0.0;
  int nvalid = 0;
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const int x = x0 + dx;
      const int y = y0 + dy;
      if (x < 0 || y < 0 || x >= depth.width() || y >= depth.height()) continue;
      const double d = depth.at(x, y);
      if (!DepthMap::is_valid_depth(d)) continue;
      const double w = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
      acc += w * d;
      wsum += w;
      plain += d;
      ++nvalid;
    }
  }
  if (nvalid == 0) return -1.0;
  if (wsum > 1e-12) return acc / wsum;
  return plain / nvalid;
}

CovisLabel classify_pixel(const CameraFrame& src, const CameraFrame& tgt, const RigidPose& rel,
                          int x, int y, const AnnotateOptions& opts) {
  const double d = src.depth.at(x, y);
  if (!DepthMap::is_valid_depth(d)) return CovisLabel::Ignore;

  const Vec3 p_src = unproject(src.intrinsics, x + 0.5, y + 0.5, d);
  const Vec3 p_tgt = rel.apply(p_src);
  const auto proj = project(tgt.intrinsics, p_tgt);
  if (!proj) return CovisLabel::OutsideFov;
  if (!(proj->u >= 0.0 && proj->u < tgt.intrinsics.width && proj->v >= 0.0 &&
        proj->v < tgt.intrinsics.height))
    return CovisLabel::OutsideFov;

  const double stored = sample_depth_bilinear(tgt.depth, proj->u, proj->v);
  if (!(stored > 0.0)) {
    switch (opts.invalid_target_policy) {
      case InvalidTargetPolicy::Occluded: return CovisLabel::Occluded;
      case InvalidTargetPolicy::Covisible: return CovisLabel::Covisible;
      case InvalidTargetPolicy::Ignore: return CovisLabel::Ignore;
    }
  }
  const double slack = std::max(opts.tolerance.relative * stored, opts.tolerance.absolute);
  return proj->depth <= stored + slack ? CovisLabel::Covisible : CovisLabel::Occluded;
}

CovisLabel classify_pixel(const CameraFrame& src, const CameraFrame& tgt, int x, int y,
                          const AnnotateOptions& opts) {
  return classify_pixel(src, tgt, relative_pose(src.pose, tgt.pose), x, y, opts);
}

namespace {

void check_inputs(const CameraFrame& src, const CameraFrame& tgt, const AnnotateOptions& opts) {
  src.validate();
  tgt.validate();
  if (!(opts.tolerance.relative >= 0.0) || !(opts.tolerance.absolute >= 0.0))
    throw ConfigError("occlusion tolerance must be non-negative");
}

}  // namespace

CovisMap annotate_pair(const CameraFrame& src, const CameraFrame& tgt, const AnnotateOptions& opts) {
  check_inputs(src, tgt, opts);
  const RigidPose rel = relative_pose(src.pose, tgt.pose);
  const int w = src.intrinsics.width;
  const int h = src.intrinsics.height;
  CovisMap out(w, h);
  auto labels = out.labels();

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      labels[static_cast<std::size_t>(y) * w + x] = classify_pixel(src, tgt, rel, x, y, opts);
    }
  }
  return out;
}

CovisMap remap_classes(const CovisMap& map, ClassScheme scheme) {
  if (map.scheme == scheme) return map;
  if (map.scheme != ClassScheme::ThreeClass)
    throw UsageError("remap_classes: only three-class maps can be merged");

  CovisMap out = map;
  out.scheme = scheme;
  for (CovisLabel& l : out.labels()) {
    switch (l) {
      case CovisLabel::Occluded:
        l = scheme == ClassScheme::CovisibleOrNot ? CovisLabel::Occluded : CovisLabel::Covisible;
        break;
      case CovisLabel::OutsideFov:
        // The merged "negative" class is stored as 1.
        l = CovisLabel::Occluded;
        break;
      default:
        break;
    }
  }
  return out;
}

}  // namespace covis
