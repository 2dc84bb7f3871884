#pragma once

// Relative pose and correspondence evaluation.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "covis/covisibility.hpp"
#include "covis/geom3d.hpp"
#include "covis/pairmetrics.hpp"

namespace covis::eval {

struct PoseError {
  double rotation_deg = 0.0;
  double translation_m = 0.0;
  /// Undefined when either translation is shorter than 1e-9 m.
  std::optional<double> translation_angle_deg;
};

PoseError pose_error(const RigidPose& gt, const RigidPose& pred);

struct Threshold {
  double rotation_deg = 0.0;
  double translation_m = 0.0;
  std::string label() const;
};

/// Thresholds reported for outdoor and indoor benchmarks respectively.
std::vector<Threshold> default_outdoor_thresholds();  // 5deg/0.5m, 5deg/2m, 10deg/5m
std::vector<Threshold> default_indoor_thresholds();   // 10deg/0.25m, 10deg/0.5m, 10deg/1m

/// Percent of pairs with rotation <= rot and metric translation <= trans.
/// nullopt for an empty error list.
std::optional<double> success_rate(const std::vector<PoseError>& errors, const Threshold& t);

/// Scalar used for AUC: max(rotation, angular translation). nullopt when the
/// angular term is undefined.
std::optional<double> auc_error(const PoseError& e);

struct AucResult {
  std::vector<double> thresholds_deg;
  std::vector<std::optional<double>> auc_percent;  ///< nullopt when no pair has a defined error
  std::size_t excluded = 0;                        ///< pairs without a defined AUC error
};

/// Exact area under the recall curve on [0, theta], normalized by theta, in
/// percent: mean over pairs of max(0, theta - e) / theta * 100.
AucResult auc_at(const std::vector<PoseError>& errors, const std::vector<double>& thresholds_deg = {5.0, 10.0, 20.0});

struct BinStats {
  std::string label;
  std::size_t count = 0;
  std::size_t successes = 0;
  std::optional<double> rate;  ///< nullopt for an empty bin
};

struct BinnedReport {
  Threshold threshold;
  std::vector<BinStats> overlap;
  std::vector<BinStats> scale;
  std::vector<BinStats> angle;
  std::size_t defined_pairs = 0;
  std::size_t excluded_pairs = 0;  ///< pairs with undefined criteria
};

BinnedReport binned_report(const std::vector<PoseError>& errors, const std::vector<PairCriteria>& criteria,
                           const CriteriaBins& bins, const Threshold& t);

struct EvalReport {
  std::vector<std::string> pair_ids;
  std::vector<PoseError> errors;
  std::vector<std::pair<Threshold, std::optional<double>>> success;
  AucResult auc;
  std::optional<BinnedReport> binned;
};

EvalReport build_report(const std::vector<std::string>& pair_ids, const std::vector<RigidPose>& gt,
                        const std::vector<RigidPose>& pred, const std::vector<Threshold>& thresholds,
                        const std::vector<PairCriteria>* criteria = nullptr, const CriteriaBins& bins = {});

/// Stable key order; undefined values are null.
nlohmann::ordered_json report_to_json(const EvalReport& report);
/// One row per bin in the binned table; header "criterion,bin,count,successes,rate".
std::string binned_report_csv(const BinnedReport& report);

// Correspondences --------------------------------------------------------

/// Displacement (du, dv) from each source pixel center to its reprojection in
/// the target; valid only for covisible pixels.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<double> du;
  std::vector<double> dv;
  std::vector<std::uint8_t> valid;
};

FlowField gt_flow(const CameraFrame& src, const CameraFrame& tgt, const AnnotateOptions& opts = {});

struct Match {
  int source_token = 0;
  int target_token = 0;
  double source_u = 0.0;
  double source_v = 0.0;
  double target_u = 0.0;
  double target_v = 0.0;
  double similarity = 0.0;
};

/// Row-major token features (tokens x dim).
struct TokenFeatures {
  int tokens = 0;
  int dim = 0;
  std::vector<double> values;
};

/// For each image-1 token, the image-2 token of maximal cosine similarity
/// (first index on ties). Endpoints are the continuous coordinates of the
/// pixel at offset (p/2, p/2) inside each patch; `grid_width` is the number
/// of patches per row.
std::vector<Match> correspondences_from_features(const TokenFeatures& f1, const TokenFeatures& f2, int patch_size,
                                                 int grid_width);

/// Matches with similarity >= floor.
std::vector<Match> filter_matches(const std::vector<Match>& matches, double floor);

/// Mean endpoint error in pixels over matches whose source pixel has valid
/// flow; nullopt when none has.
std::optional<double> aepe(const std::vector<Match>& matches, const FlowField& flow);

}  // namespace covis::eval
