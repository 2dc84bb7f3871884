#pragma once

// Synthetic data for toy pretraining, pose fine-tuning and correspondence
// evaluation.

#include <cstdint>
#include <vector>

#include "covis/geom3d.hpp"
#include "covis/net/train.hpp"
#include "covis/synthscene.hpp"

namespace covis::net {

/// Patch-aligned covisibility task. A strip of random-colored patches is
/// viewed twice; view 2 is shifted right by s patches (s uniform in
/// [min_shift, max_shift]). Each view carries `occluders` magenta patches.
/// Per view, a patch is OutsideFov when its content leaves the other view or
/// it is itself an occluder, Occluded when the other view covers it with an
/// occluder, Covisible otherwise.
struct ShiftTaskConfig {
  int min_shift = 0;
  int max_shift = 1;
  int occluders = 2;
  double noise = 0.05;  ///< uniform per-pixel jitter amplitude
};

PairSample make_shift_pair(const ModelConfig& cfg, std::uint64_t seed, const ShiftTaskConfig& task = {});
std::vector<PairSample> make_shift_dataset(const ModelConfig& cfg, int count, std::uint64_t seed,
                                           const ShiftTaskConfig& task = {});

/// Locally separable task: every patch of both views draws its color from
/// one of three disjoint families (green, orange, gray) and is labelled
/// Covisible, Occluded or OutsideFov accordingly.
PairSample make_palette_pair(const ModelConfig& cfg, std::uint64_t seed, double noise = 0.05);
std::vector<PairSample> make_palette_dataset(const ModelConfig& cfg, int count, std::uint64_t seed,
                                             double noise = 0.05);

/// Square pinhole camera with the default field of view.
CameraIntrinsics toy_intrinsics(int size);
Image to_image(const synth::ColorImage& img);

struct PoseSample {
  PairSample sample;  ///< labels and pose target filled in
  RigidPose rel;      ///< camera 1 to camera 2
  CameraFrame frame1;
  CameraFrame frame2;
};

/// Rendered pairs from independently sampled scenes.
std::vector<PoseSample> make_pose_dataset(const ModelConfig& cfg, int count, std::uint64_t seed);

}  // namespace covis::net
