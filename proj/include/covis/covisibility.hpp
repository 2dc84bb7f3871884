#pragma once

// Dense three-class covisibility annotation from depth and poses.
//
// Every source pixel with valid depth is lifted to 3-D, moved into the target
// camera and labelled:
//   OutsideFov - behind the target camera or projecting outside [0,W)x[0,H)
//   Occluded   - inside the target frustum but farther than the target depth
//   Covisible  - otherwise
// Pixels without source depth are Ignore and never count anywhere.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "covis/geom3d.hpp"

namespace covis {

enum class CovisLabel : std::uint8_t { Covisible = 0, Occluded = 1, OutsideFov = 2, Ignore = 255 };

bool is_valid_label_value(std::uint8_t v);

enum class ClassScheme : std::uint8_t { ThreeClass = 0, CovisibleOrNot = 1, InsideFovOrNot = 2 };

/// Number of trainable classes under a scheme (3 or 2).
int class_count(ClassScheme scheme);

/// Ordered (source -> target) identifier of one annotation direction.
struct PairDirection {
  std::string scene;
  std::string source;
  std::string target;
  bool operator==(const PairDirection&) const = default;
};

class CovisMap {
 public:
  CovisMap() = default;
  CovisMap(int width, int height, CovisLabel fill = CovisLabel::Ignore);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return labels_.size(); }

  CovisLabel at(int x, int y) const { return labels_[index(x, y)]; }
  CovisLabel& at(int x, int y) { return labels_[index(x, y)]; }
  std::span<const CovisLabel> labels() const { return labels_; }
  std::span<CovisLabel> labels() { return labels_; }

  ClassScheme scheme = ClassScheme::ThreeClass;
  PairDirection direction;

  std::size_t count(CovisLabel label) const;
  /// N_i: number of pixels that are not Ignore.
  std::size_t labelled_count() const;

  /// Compares dimensions, scheme and labels (not the direction tag).
  bool same_labels(const CovisMap& other) const;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<CovisLabel> labels_;
};

struct OcclusionTolerance {
  double relative = 0.01;
  double absolute = 0.05;
};

/// Label given when no bilinear neighbor of the projection has valid target depth.
enum class InvalidTargetPolicy { Occluded, Covisible, Ignore };

struct AnnotateOptions {
  OcclusionTolerance tolerance;
  InvalidTargetPolicy invalid_target_policy = InvalidTargetPolicy::Occluded;
};

/// Bilinear sample of `depth` at continuous coordinates, skipping invalid and
/// out-of-image neighbors. Returns a non-positive value when none is usable.
double sample_depth_bilinear(const DepthMap& depth, double u, double v);

/// Per-pixel classification. `rel` is relative_pose(src.pose, tgt.pose).
CovisLabel classify_pixel(const CameraFrame& src, const CameraFrame& tgt, const RigidPose& rel,
                          int x, int y, const AnnotateOptions& opts);

/// Convenience overload that computes the relative pose itself.
CovisLabel classify_pixel(const CameraFrame& src, const CameraFrame& tgt, int x, int y,
                          const AnnotateOptions& opts = {});

/// Dense annotation, parallel over rows with OpenMP. Output does not depend
/// on the thread count.
CovisMap annotate_pair(const CameraFrame& src, const CameraFrame& tgt, const AnnotateOptions& opts = {});

/// Single-threaded reference for annotate_pair; kept for testing and benchmarks.
CovisMap annotate_pair_reference(const CameraFrame& src, const CameraFrame& tgt,
                                 const AnnotateOptions& opts = {});

/// Class merging for the two-class ablations. Ignore is always preserved.
///   CovisibleOrNot: {0} -> 0, {1,2} -> 1
///   InsideFovOrNot: {0,1} -> 0, {2} -> 1
CovisMap remap_classes(const CovisMap& map, ClassScheme scheme);

}  // namespace covis
