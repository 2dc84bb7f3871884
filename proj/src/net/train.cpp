#include "covis/net/train.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "covis/errors.hpp"

namespace covis::net {

LossIds record_losses(Binder& b, const PairSample& s) {
  Graph& g = b.graph();
  const ModelConfig& cfg = b.params().config();
  if (s.tokens1.rows != cfg.tokens() || s.tokens1.cols != cfg.token_len() || !s.tokens1.same_shape(s.tokens2))
    throw ConfigError("token matrix shape does not match the model config");
  const Graph::Id f1 = encode(b, g.constant(s.tokens1));
  const Graph::Id f2 = encode(b, g.constant(s.tokens2));
  return attach_losses(b, s, decode(b, f1, f2), decode(b, f2, f1));
}

LossIds attach_losses(Binder& b, const PairSample& s, Graph::Id o1, Graph::Id o2) {
  Graph& g = b.graph();
  const ModelConfig& cfg = b.params().config();
  LossIds out;
  if (s.labels1.empty() && s.labels2.empty()) {
    out.ce = g.constant(Matrix(1, 1));
  } else {
    const Graph::Id l1 = g.cross_entropy(seg_logits(b, o1), s.labels1, cfg.classes);
    const Graph::Id l2 = g.cross_entropy(seg_logits(b, o2), s.labels2, cfg.classes);
    out.ce = g.add(l1, l2);
  }
  if (s.pose) {
    const PoseIds pose = pose_head(b, o1, o2);
    out.pose = pose_loss(g, pose.t, pose.q, *s.pose, b("s_t"), b("s_q"), cfg.align_quat_sign);
  } else {
    out.pose = g.constant(Matrix(1, 1));
  }
  out.joint = joint_loss(g, out.pose, out.ce, b("s_seg"));
  return out;
}

LossValues evaluate(const ModelParameters& params, std::span<const PairSample> batch, Objective objective,
                    std::vector<Matrix>* grads, const std::vector<bool>* trainable) {
  if (batch.empty()) throw ConfigError("evaluate: empty batch");
  if (trainable && trainable->size() != params.size()) throw ConfigError("evaluate: trainable mask size");
  const std::size_t n = batch.size();
  std::vector<LossValues> losses(n);
  std::vector<std::vector<Matrix>> per_sample(grads ? n : 0);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    Graph g;
    Binder b(g, params, trainable);
    const LossIds ids = record_losses(b, batch[i]);
    losses[i] = {g.scalar(ids.ce), g.scalar(ids.pose), g.scalar(ids.joint)};
    if (!grads) continue;
    const Graph::Id target = objective == Objective::Segmentation ? ids.ce
                             : objective == Objective::Pose       ? ids.pose
                                                                  : ids.joint;
    g.backward(target);
    auto& out = per_sample[i];
    out.reserve(params.size());
    for (const auto& m : params.values) out.emplace_back(m.rows, m.cols, 0.0);
    for (const auto& [index, grad] : g.param_grads()) out[static_cast<std::size_t>(index)] = *grad;
  }

  LossValues mean;
  for (const auto& l : losses) {
    mean.ce += l.ce;
    mean.pose += l.pose;
    mean.joint += l.joint;
  }
  const double inv = 1.0 / static_cast<double>(n);
  mean.ce *= inv;
  mean.pose *= inv;
  mean.joint *= inv;

  if (grads) {
    grads->clear();
    for (const auto& m : params.values) grads->emplace_back(m.rows, m.cols, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto& dst = (*grads)[p].v;
        const auto& src = per_sample[i][p].v;
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
    for (auto& m : *grads)
      for (double& x : m.v) x *= inv;
  }
  return mean;
}

nlohmann::ordered_json to_json(const LogRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["phase"] = r.phase;
  j["lr"] = r.lr;
  j["L_ce"] = r.loss.ce;
  j["L_pose"] = r.loss.pose;
  j["L_joint"] = r.loss.joint;
  j["s_t"] = r.s_t;
  j["s_q"] = r.s_q;
  j["s_seg"] = r.s_seg;
  return j;
}

namespace {

LogRecord make_record(const ModelParameters& p, std::int64_t step, int phase, double lr, const LossValues& l) {
  return {step, phase, lr, l, p["s_t"].v[0], p["s_q"].v[0], p["s_seg"].v[0]};
}

// Sequential batches over per-epoch shuffles of [0, n).
class BatchStream {
 public:
  BatchStream(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) { reshuffle(); }

  std::vector<std::size_t> next_epoch() {
    std::vector<std::size_t> out = order_;
    reshuffle();
    return out;
  }

  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    while (out.size() < count) {
      if (cursor_ == order_.size()) reshuffle();
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t cursor_ = 0;
};

std::vector<PairSample> gather(const std::vector<PairSample>& data, std::span<const std::size_t> idx) {
  std::vector<PairSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data[i]);
  return out;
}

}  // namespace

LossValues pretrain_step(ModelParameters& params, AdamW& opt, std::span<const PairSample> batch, double lr) {
  std::vector<Matrix> grads;
  const LossValues l = evaluate(params, batch, Objective::Segmentation, &grads);
  opt.step(params, grads, lr);
  return l;
}

std::vector<LogRecord> pretrain(ModelParameters& params, const std::vector<PairSample>& data,
                                const PretrainConfig& cfg, const LogSink& sink) {
  if (data.empty()) throw ConfigError("pretrain: no training data");
  if (cfg.steps <= 0 || cfg.batch <= 0 || cfg.warmup < 0) throw ConfigError("pretrain: bad step configuration");
  AdamW opt(params, {.weight_decay = cfg.weight_decay});
  const LrSchedule sched{cfg.lr, cfg.warmup, cfg.steps};
  BatchStream stream(data.size(), cfg.seed);
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), data.size());
  std::vector<LogRecord> log;
  for (int step = 0; step < cfg.steps; ++step) {
    const double lr = sched.at(step);
    const auto samples = gather(data, stream.next(batch));
    const LossValues l = pretrain_step(params, opt, samples, lr);
    log.push_back(make_record(params, step, 0, lr, l));
    if (sink) sink(log.back());
  }
  return log;
}

std::vector<bool> phase_mask(const ModelParameters& params, int phase) {
  if (phase != 1 && phase != 2) throw ConfigError("phase must be 1 or 2");
  std::vector<bool> mask(params.size(), true);
  if (phase == 1)
    for (std::size_t i = 0; i < params.size(); ++i) {
      const ParamGroup g = params.info[i].group;
      mask[i] = g == ParamGroup::PoseHead || g == ParamGroup::PoseUncertainty;
    }
  return mask;
}

FinetuneResult finetune(ModelParameters& params, const std::vector<PairSample>& data, const FinetuneConfig& cfg,
                        const LogSink& sink) {
  if (data.empty()) throw ConfigError("finetune: no training data");
  for (const auto& s : data)
    if (!s.pose) throw ConfigError("finetune: sample without a pose target");
  if (cfg.batch <= 0 || cfg.phase1_epochs < 0 || cfg.phase2_epochs < 0 || cfg.warmup_epochs < 0)
    throw ConfigError("finetune: bad epoch configuration");

  FinetuneResult result;
  BatchStream stream(data.size(), cfg.seed);
  const std::size_t batch = static_cast<std::size_t>(cfg.batch);
  const int steps_per_epoch = static_cast<int>((data.size() + batch - 1) / batch);
  std::int64_t global_step = 0;

  for (int phase = 1; phase <= 2; ++phase) {
    const int epochs = phase == 1 ? cfg.phase1_epochs : cfg.phase2_epochs;
    const int total = epochs * steps_per_epoch;
    const LrSchedule sched{phase == 1 ? cfg.phase1_lr : cfg.phase2_lr,
                           std::min(cfg.warmup_epochs, epochs) * steps_per_epoch, total};
    const std::vector<bool> mask = phase_mask(params, phase);
    const Objective objective = phase == 1 ? Objective::Pose : Objective::Joint;
    AdamW opt(params, {.weight_decay = cfg.weight_decay});
    int step = 0;
    for (int e = 0; e < epochs; ++e) {
      const auto order = stream.next_epoch();
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t end = std::min(order.size(), start + batch);
        const auto samples = gather(data, std::span(order).subspan(start, end - start));
        const double lr = sched.at(step);
        std::vector<Matrix> grads;
        const LossValues l = evaluate(params, samples, objective, &grads, &mask);
        opt.step(params, grads, lr, mask);
        result.log.push_back(make_record(params, global_step, phase, lr, l));
        if (sink) sink(result.log.back());
        ++step;
        ++global_step;
      }
    }
    (phase == 1 ? result.phase1_steps : result.phase2_steps) = step;
  }
  return result;
}

RigidPose predict_pose(const ModelParameters& params, const PairSample& s) {
  Graph g;
  const std::vector<bool> frozen(params.size(), false);
  Binder b(g, params, &frozen);
  const ForwardIds f = forward(b, s.tokens1, s.tokens2);
  const auto& t = g.value(f.pose.t).v;
  const auto& q = g.value(f.pose.q).v;
  RigidPose pose;
  pose.rotation = quat_normalize({q[0], q[1], q[2], q[3]});
  pose.translation = Vec3(t[0], t[1], t[2]);
  return pose;
}

std::optional<double> pixel_accuracy(const ModelParameters& params, std::span<const PairSample> samples) {
  const int k = params.config().classes;
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& s : samples) {
    Graph g;
    const std::vector<bool> frozen(params.size(), false);
    Binder b(g, params, &frozen);
    const ForwardIds f = forward(b, s.tokens1, s.tokens2);
    for (const auto& [logits, labels] : {std::pair{f.logits1, &s.labels1}, std::pair{f.logits2, &s.labels2}}) {
      const auto& z = g.value(logits).v;
      for (std::size_t px = 0; px < labels->size(); ++px) {
        const int label = (*labels)[px];
        if (label < 0) continue;
        const double* row = &z[px * static_cast<std::size_t>(k)];
        const int arg = static_cast<int>(std::max_element(row, row + k) - row);
        correct += arg == label;
        ++total;
      }
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace covis::net
