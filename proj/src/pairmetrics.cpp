#include "covis/pairmetrics.hpp"

#include <algorithm>
#include <cstdio>

#include "covis/errors.hpp"

namespace covis {

namespace {

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

// Source-frame point and its target-frame image for every covisible pixel.
template <typename Fn>
void for_each_covisible(const CameraFrame& src, const CameraFrame& tgt, const CovisMap& map, Fn&& fn) {
  if (map.width() != src.intrinsics.width || map.height() != src.intrinsics.height)
    throw ConfigError("covis map does not match the source frame size");
  const RigidPose rel = relative_pose(src.pose, tgt.pose);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (map.at(x, y) != CovisLabel::Covisible) continue;
      const double d = src.depth.at(x, y);
      if (!DepthMap::is_valid_depth(d)) continue;
      const Vec3 p_src = unproject(src.intrinsics, x + 0.5, y + 0.5, d);
      fn(p_src, rel.apply(p_src));
    }
  }
}

}  // namespace

std::optional<double> directional_overlap(const CovisMap& map) {
  const std::size_t n = map.labelled_count();
  if (n == 0) return std::nullopt;
  return static_cast<double>(map.count(CovisLabel::Covisible)) / static_cast<double>(n);
}

std::optional<double> overlap(const CovisMap& map_ab, const CovisMap& map_ba) {
  const PairDirection& ab = map_ab.direction;
  const PairDirection& ba = map_ba.direction;
  if (ab.scene != ba.scene || ab.source != ba.target || ab.target != ba.source)
    throw UsageError("overlap: maps are not the two directions of one pair");
  const auto o_ab = directional_overlap(map_ab);
  const auto o_ba = directional_overlap(map_ba);
  if (!o_ab || !o_ba) return std::nullopt;
  return std::min(*o_ab, *o_ba);
}

std::optional<double> scale_ratio(const CameraFrame& src, const CameraFrame& tgt, const CovisMap& map) {
  std::vector<double> ratios;
  for_each_covisible(src, tgt, map, [&](const Vec3& p_src, const Vec3& p_tgt) {
    if (p_tgt.z() > kBehindCameraZ) ratios.push_back(p_src.z() / p_tgt.z());
  });
  if (ratios.empty()) return std::nullopt;
  const double m = median(std::move(ratios));
  return std::max(m, 1.0 / m);
}

std::optional<double> viewpoint_angle(const CameraFrame& src, const CameraFrame& tgt, const CovisMap& map,
                                      ViewpointMode mode) {
  if (mode == ViewpointMode::OpticalAxis) {
    if (map.count(CovisLabel::Covisible) == 0) return std::nullopt;
    const Vec3 axis_src = src.pose.rotation.rotate(Vec3::UnitZ());
    const Vec3 axis_tgt = tgt.pose.rotation.rotate(Vec3::UnitZ());
    return angle_between_deg(axis_src, axis_tgt);
  }
  // Source camera frame: its center is the origin.
  const Vec3 tgt_center = src.pose.rotation.conjugate().rotate(tgt.pose.translation - src.pose.translation);
  std::vector<double> angles;
  for_each_covisible(src, tgt, map, [&](const Vec3& p_src, const Vec3&) {
    angles.push_back(angle_between_deg(-p_src, tgt_center - p_src));
  });
  if (angles.empty()) return std::nullopt;
  return median(std::move(angles));
}

PairCriteria compute_criteria(const CameraFrame& a, const CameraFrame& b, const CovisMap& map_ab,
                              const CovisMap& map_ba, ViewpointMode mode) {
  PairCriteria c;
  const auto o = overlap(map_ab, map_ba);
  const auto s = scale_ratio(a, b, map_ab);
  const auto v = viewpoint_angle(a, b, map_ab, mode);
  if (!o || !s || !v) return c;
  c.defined = true;
  c.overlap = *o;
  c.scale_ratio = *s;
  c.viewpoint_angle = *v;
  return c;
}

void CriteriaBins::validate() const {
  for (const auto* edges : {&overlap, &scale, &angle}) {
    if (edges->size() < 2) throw ConfigError("criteria bins need at least two edges");
    for (std::size_t i = 1; i < edges->size(); ++i)
      if (!((*edges)[i] > (*edges)[i - 1])) throw ConfigError("criteria bin edges must strictly increase");
  }
}

int bin_index(const std::vector<double>& edges, double value) {
  const int nbins = static_cast<int>(edges.size()) - 1;
  // upper_bound gives the first edge strictly greater than value, which puts
  // an interior edge into the upper bin.
  const auto it = std::upper_bound(edges.begin(), edges.end(), value);
  const int idx = static_cast<int>(it - edges.begin()) - 1;
  return std::clamp(idx, 0, nbins - 1);
}

std::string bin_label(const std::vector<double>& edges, int index, bool percent, int decimals) {
  const double scale = percent ? 100.0 : 1.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f-%.*f", decimals, edges.at(index) * scale, decimals,
                edges.at(index + 1) * scale);
  return buf;
}

BinAssignment assign_bins(const PairCriteria& c, const CriteriaBins& bins) {
  if (!c.defined) throw UsageError("assign_bins: criteria are undefined");
  return {bin_index(bins.overlap, c.overlap), bin_index(bins.scale, c.scale_ratio),
          bin_index(bins.angle, c.viewpoint_angle)};
}

}  // namespace covis
