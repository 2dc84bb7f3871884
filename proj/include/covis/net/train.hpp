#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "covis/geom3d.hpp"
#include "covis/net/losses.hpp"
#include "covis/net/model.hpp"
#include "covis/net/optim.hpp"

namespace covis::net {

struct PairSample {
  Matrix tokens1;
  Matrix tokens2;
  /// Token-major labels (see token_labels); empty when the pair has no
  /// segmentation target.
  std::vector<int> labels1;
  std::vector<int> labels2;
  std::optional<PoseTarget> pose;
};

enum class Objective { Segmentation, Pose, Joint };

struct LossValues {
  double ce = 0.0;     ///< L_1 + L_2 over both images
  double pose = 0.0;
  double joint = 0.0;
};

struct LossIds {
  Graph::Id ce = -1;
  Graph::Id pose = -1;
  Graph::Id joint = -1;
};

/// Records the forward pass and all three losses of one pair. Pose terms are
/// zero-valued constants when the sample has no pose target, likewise the
/// segmentation term without labels.
LossIds record_losses(Binder& b, const PairSample& s);
/// Same, starting from decoder outputs already in the graph.
LossIds attach_losses(Binder& b, const PairSample& s, Graph::Id o1, Graph::Id o2);

/// Batch-mean losses; when `grads` is non-null it receives the batch-mean
/// gradient of `objective` (zeros for parameters outside `trainable`).
/// Samples run in parallel and reduce in index order.
LossValues evaluate(const ModelParameters& params, std::span<const PairSample> batch, Objective objective,
                    std::vector<Matrix>* grads = nullptr, const std::vector<bool>* trainable = nullptr);

struct LogRecord {
  std::int64_t step = 0;
  int phase = 0;  ///< 0 pretraining, 1 and 2 fine-tuning phases
  double lr = 0.0;
  LossValues loss;
  double s_t = 0.0;
  double s_q = 0.0;
  double s_seg = 0.0;
};

nlohmann::ordered_json to_json(const LogRecord& r);
using LogSink = std::function<void(const LogRecord&)>;

/// One AdamW update on L_ce; returns the losses measured before the update.
LossValues pretrain_step(ModelParameters& params, AdamW& opt, std::span<const PairSample> batch, double lr);

struct PretrainConfig {
  int steps = 400;
  int warmup = 40;
  double lr = 1e-3;
  double weight_decay = 0.05;
  int batch = 8;
  std::uint64_t seed = 0;
};

std::vector<LogRecord> pretrain(ModelParameters& params, const std::vector<PairSample>& data,
                                const PretrainConfig& cfg, const LogSink& sink = {});

struct FinetuneConfig {
  int phase1_epochs = 5;
  int phase2_epochs = 10;
  double phase1_lr = 1e-4;
  double phase2_lr = 5e-5;
  int warmup_epochs = 1;  ///< per phase
  double weight_decay = 0.05;
  int batch = 8;
  std::uint64_t seed = 0;
};

struct FinetuneResult {
  std::vector<LogRecord> log;
  int phase1_steps = 0;
  int phase2_steps = 0;
};

/// Phase 1 trains the pose head and s_t, s_q on L_pose with the backbone and
/// s_seg frozen; phase 2 trains everything on L_joint.
FinetuneResult finetune(ModelParameters& params, const std::vector<PairSample>& data, const FinetuneConfig& cfg,
                        const LogSink& sink = {});

/// Trainable flags for the given phase (1 or 2).
std::vector<bool> phase_mask(const ModelParameters& params, int phase);

/// Relative pose predicted for a sample (canonical quaternion).
RigidPose predict_pose(const ModelParameters& params, const PairSample& s);

/// Fraction of labelled pixels, over both images of every sample, whose
/// argmax class equals the label. nullopt when nothing is labelled.
std::optional<double> pixel_accuracy(const ModelParameters& params, std::span<const PairSample> samples);

}  // namespace covis::net
