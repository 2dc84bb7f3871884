#pragma once

// Pair-level geometric criteria: overlap, scale ratio and viewpoint angle,
// plus the fixed bins used for histograms and binned success tables.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "covis/covisibility.hpp"
#include "covis/geom3d.hpp"

namespace covis {

/// Directional overlap: covisible / non-Ignore pixels. nullopt if the map has
/// no labelled pixel.
std::optional<double> directional_overlap(const CovisMap& map);

/// min(o_ab, o_ba). Throws UsageError when the two maps are not the two
/// directions of one pair.
std::optional<double> overlap(const CovisMap& map_ab, const CovisMap& map_ba);

/// Folded median of (source depth / depth in target camera) over Covisible
/// pixels; >= 1. nullopt without covisible pixels.
std::optional<double> scale_ratio(const CameraFrame& src, const CameraFrame& tgt, const CovisMap& map);

enum class ViewpointMode {
  Triangulation,  ///< median angle at each covisible point between rays to both centers
  OpticalAxis,    ///< angle between the two optical axes
};

std::optional<double> viewpoint_angle(const CameraFrame& src, const CameraFrame& tgt, const CovisMap& map,
                                      ViewpointMode mode = ViewpointMode::Triangulation);

struct PairCriteria {
  bool defined = false;
  double overlap = 0.0;
  double scale_ratio = 0.0;
  double viewpoint_angle = 0.0;
};

PairCriteria compute_criteria(const CameraFrame& a, const CameraFrame& b, const CovisMap& map_ab,
                              const CovisMap& map_ba, ViewpointMode mode = ViewpointMode::Triangulation);

struct CriteriaBins {
  std::vector<double> overlap{0.05, 0.20, 0.40, 0.60, 0.80, 1.00};
  std::vector<double> scale{1.0, 1.5, 2.5, 4.0, 6.0};
  std::vector<double> angle{0.0, 30.0, 60.0, 120.0, 180.0};

  /// Throws ConfigError unless every edge list is strictly increasing with >= 2 entries.
  void validate() const;
};

/// Bin of `value` among `edges`: half-open [lo, hi) with the last bin closed.
/// Values below the first edge fall into bin 0 and above the last edge into
/// the last bin.
int bin_index(const std::vector<double>& edges, double value);

/// "40-60" style label; overlap edges are printed in percent.
std::string bin_label(const std::vector<double>& edges, int index, bool percent = false, int decimals = 0);

struct BinAssignment {
  int overlap = 0;
  int scale = 0;
  int angle = 0;
};

BinAssignment assign_bins(const PairCriteria& c, const CriteriaBins& bins = {});

}  // namespace covis
