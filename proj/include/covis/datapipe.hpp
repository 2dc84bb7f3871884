#pragma once

// Dataset construction: manifests, exhaustive pair enumeration, overlap
// filtering, uniform subsampling, label noise, pair index files and
// criteria histograms.
//
// Manifest (scene.json):
//   {
//     "scene_id": "kitchen",
//     "split": "train" | "test",
//     "frames": [
//       { "id": "000",
//         "intrinsics": {"fx": .., "fy": .., "cx": .., "cy": .., "width": .., "height": ..},
//         "pose": {"q": [w, x, y, z], "t": [x, y, z]},      // world-from-camera
//         "depth": "depth/000.pfm",                          // relative to the manifest
//         "image": "image/000.ppm" }                         // optional
//     ],
//     "primitives": [{"lo": [..], "hi": [..]}]               // optional, synthetic scenes
//   }
// Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "covis/covisibility.hpp"
#include "covis/geom3d.hpp"
#include "covis/pairmetrics.hpp"
#include "covis/synthscene.hpp"

namespace covis {

struct FrameRecord {
  std::string id;
  CameraIntrinsics intrinsics;
  RigidPose pose;
  std::filesystem::path depth_path;  ///< resolved against the manifest directory
  std::optional<std::filesystem::path> image_path;
};

enum class Split { Train, Test };
std::string to_string(Split s);

struct SceneManifest {
  std::string scene_id;
  Split split = Split::Train;
  std::vector<FrameRecord> frames;
  std::vector<synth::Primitive> primitives;
  std::filesystem::path base_dir;

  /// Throws ConfigError on duplicate frame ids or invalid intrinsics.
  void validate() const;
  int frame_index(const std::string& id) const;
};

SceneManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const SceneManifest& manifest);

/// Loads a frame's depth and checks it against the intrinsics.
CameraFrame load_frame(const FrameRecord& record);

/// All unordered index pairs (i, j), i < j, in lexicographic order.
std::vector<std::pair<int, int>> enumerate_pairs(const SceneManifest& manifest);
std::vector<std::pair<int, int>> enumerate_pairs(int frame_count);

struct DatasetVariant {
  std::string name;
  double min_overlap = 0.05;

  static DatasetVariant all_pairs() { return {"overlap-5", 0.05}; }
  static DatasetVariant high_overlap() { return {"overlap-50", 0.50}; }
};

struct PairRecord {
  std::string scene;
  std::string frame_i;
  std::string frame_j;
  int index_i = 0;
  int index_j = 0;
  PairCriteria criteria;
  std::string map_ij;  ///< CUB3 file, i -> j, relative to the index file
  std::string map_ji;
};

struct SkippedPair {
  std::string scene;
  std::string frame_i;
  std::string frame_j;
  std::string reason;
};

struct BuildOptions {
  AnnotateOptions annotate;
  ClassScheme scheme = ClassScheme::ThreeClass;
  std::uint64_t seed = 0;
  std::size_t max_pairs = 0;  ///< 0 keeps every filtered pair
  /// When set, CUB3 maps of the kept pairs are written under this directory
  /// as maps/<scene>_<i>_<j>.cub3 and maps/<scene>_<j>_<i>.cub3.
  std::optional<std::filesystem::path> output_dir;
};

struct BuildResult {
  std::vector<PairRecord> records;  ///< sorted by (scene, index_i, index_j)
  std::vector<SkippedPair> skipped;
  std::size_t annotated = 0;        ///< pairs annotated before filtering
};

/// Annotates every pair, keeps those with overlap >= variant.min_overlap and
/// subsamples uniformly without replacement. Pairs whose frames cannot be
/// loaded are skipped, not fatal. Deterministic for a given seed and
/// independent of the thread count.
BuildResult build_variant(const SceneManifest& manifest, const DatasetVariant& variant, const BuildOptions& opts);

/// Records whose criteria are defined with overlap >= threshold, order kept.
std::vector<PairRecord> filter_by_overlap(const std::vector<PairRecord>& records, double threshold);

/// Uniform subsample without replacement to at most `max_pairs`, returned in
/// the input order.
std::vector<PairRecord> subsample_pairs(const std::vector<PairRecord>& records, std::size_t max_pairs,
                                        std::uint64_t seed);

struct NoiseStats {
  std::size_t eligible = 0;
  std::size_t flipped = 0;
};

/// Each non-Ignore pixel is, with probability p, replaced by one of the other
/// classes of the map's scheme chosen uniformly. Deterministic in the seed.
CovisMap inject_label_noise(const CovisMap& map, double p, std::uint64_t seed, NoiseStats* stats = nullptr);

struct CriteriaHistograms {
  std::vector<std::size_t> overlap;
  std::vector<std::size_t> scale;
  std::vector<std::size_t> angle;
  std::size_t undefined = 0;
};

CriteriaHistograms criteria_histograms(const std::vector<PairRecord>& records, const CriteriaBins& bins = {});

struct SplitViolation {
  std::string scene_id;
};

/// Scene ids that appear in both the train and the test split.
std::vector<SplitViolation> split_check(const std::vector<SceneManifest>& manifests);

/// One JSON object per line.
void write_pair_index(const std::filesystem::path& path, const std::vector<PairRecord>& records);
std::vector<PairRecord> read_pair_index(const std::filesystem::path& path);

/// Writes a synthetic scene (manifest, PFM depths, PPM images) with
/// `frame_count` cameras moving through the sampled scene for `seed`.
SceneManifest write_synthetic_scene(const std::filesystem::path& dir, const std::string& scene_id,
                                    std::uint64_t seed, int frame_count, Split split = Split::Train,
                                    const CameraIntrinsics& K = synth::default_intrinsics());

}  // namespace covis
