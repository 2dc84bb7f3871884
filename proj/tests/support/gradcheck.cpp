#include "gradcheck.hpp"

#include <chrono>
#include <cmath>

#include "covis/net/toy_data.hpp"

namespace covis::testing {

using net::Graph;
using net::LossValues;
using net::Matrix;

namespace {

enum class Stage { Full, FromEncoder, FromDecoder };

struct Cache {
  Matrix f1, f2, o1, o2;
};

LossValues values(const Graph& g, const net::LossIds& ids) {
  return {g.scalar(ids.ce), g.scalar(ids.pose), g.scalar(ids.joint)};
}

LossValues run(const net::ModelParameters& p, const net::PairSample& s, Stage stage, const Cache& c) {
  Graph g;
  const std::vector<bool> frozen(p.size(), false);
  net::Binder b(g, p, &frozen);
  switch (stage) {
    case Stage::Full:
      return values(g, net::record_losses(b, s));
    case Stage::FromEncoder: {
      const Graph::Id f1 = g.constant(c.f1);
      const Graph::Id f2 = g.constant(c.f2);
      return values(g, net::attach_losses(b, s, net::decode(b, f1, f2), net::decode(b, f2, f1)));
    }
    case Stage::FromDecoder:
      return values(g, net::attach_losses(b, s, g.constant(c.o1), g.constant(c.o2)));
  }
  return {};
}

Stage stage_for(net::ParamGroup g) {
  switch (g) {
    case net::ParamGroup::Encoder:
      return Stage::Full;
    case net::ParamGroup::Decoder:
      return Stage::FromEncoder;
    default:
      return Stage::FromDecoder;
  }
}

}  // namespace

GradCheckResult gradient_check(const net::ModelParameters& params, const net::PairSample& sample, double h,
                               double floor) {
  const auto t0 = std::chrono::steady_clock::now();

  Graph g;
  net::Binder b(g, params);
  const Graph::Id f1 = net::encode(b, g.constant(sample.tokens1));
  const Graph::Id f2 = net::encode(b, g.constant(sample.tokens2));
  const Graph::Id o1 = net::decode(b, f1, f2);
  const Graph::Id o2 = net::decode(b, f2, f1);
  const net::LossIds ids = net::attach_losses(b, sample, o1, o2);
  const Cache cache{g.value(f1), g.value(f2), g.value(o1), g.value(o2)};

  std::array<std::vector<Matrix>, 3> analytic;
  const Graph::Id targets[3] = {ids.ce, ids.pose, ids.joint};
  for (int l = 0; l < 3; ++l) {
    g.backward(targets[l]);
    for (const auto& m : params.values) analytic[l].emplace_back(m.rows, m.cols, 0.0);
    for (const auto& [index, grad] : g.param_grads()) analytic[l][static_cast<std::size_t>(index)] = *grad;
  }

  GradCheckResult r;
  net::ModelParameters work = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Stage stage = stage_for(params.info[i].group);
    for (std::size_t k = 0; k < params.values[i].size(); ++k) {
      double& w = work.values[i].v[k];
      const double orig = w;
      w = orig + h;
      const LossValues plus = run(work, sample, stage, cache);
      w = orig - h;
      const LossValues minus = run(work, sample, stage, cache);
      w = orig;
      const double numeric[3] = {(plus.ce - minus.ce) / (2 * h), (plus.pose - minus.pose) / (2 * h),
                                 (plus.joint - minus.joint) / (2 * h)};
      for (int l = 0; l < 3; ++l) {
        const double a = analytic[l][i].v[k];
        const double rel = std::abs(a - numeric[l]) / std::max({std::abs(a), std::abs(numeric[l]), floor});
        if (rel > r.max_rel[l]) {
          r.max_rel[l] = rel;
          r.worst[l] = params.info[i].name + "[" + std::to_string(k) + "]";
        }
      }
      ++r.checked;
    }
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

net::PairSample gradcheck_sample(const net::ModelConfig& cfg, std::uint64_t seed) {
  net::PairSample s = net::make_shift_pair(cfg, seed, {.max_shift = 1, .occluders = 2, .noise = 0.05});
  RigidPose rel;
  rel.rotation = UnitQuaternion::from_axis_angle(Vec3(0.2, 1.0, -0.1), 25.0);
  rel.translation = Vec3(0.4, -0.1, 0.3);
  s.pose = net::pose_target(rel);
  return s;
}

net::ModelParameters gradcheck_model(const net::ModelConfig& cfg, std::uint64_t seed) {
  net::ModelParameters p = net::ModelParameters::init(cfg, seed);
  p["s_t"].v[0] = 0.3;
  p["s_q"].v[0] = -0.2;
  p["s_seg"].v[0] = 0.15;
  return p;
}

}  // namespace covis::testing
