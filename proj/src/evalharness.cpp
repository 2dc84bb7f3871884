#include "covis/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "covis/errors.hpp"

namespace covis::eval {

namespace {

constexpr double kDegenerateTranslation = 1e-9;

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

bool passes(const PoseError& e, const Threshold& t) {
  return e.rotation_deg <= t.rotation_deg && e.translation_m <= t.translation_m;
}

}  // namespace

PoseError pose_error(const RigidPose& gt, const RigidPose& pred) {
  PoseError e;
  e.rotation_deg = quat_geodesic_deg(gt.rotation, pred.rotation);
  e.translation_m = (gt.translation - pred.translation).norm();
  if (gt.translation.norm() >= kDegenerateTranslation && pred.translation.norm() >= kDegenerateTranslation)
    e.translation_angle_deg = angle_between_deg(gt.translation, pred.translation);
  return e;
}

std::string Threshold::label() const {
  return format_number(rotation_deg) + "deg/" + format_number(translation_m) + "m";
}

std::vector<Threshold> default_outdoor_thresholds() { return {{5.0, 0.5}, {5.0, 2.0}, {10.0, 5.0}}; }
std::vector<Threshold> default_indoor_thresholds() { return {{10.0, 0.25}, {10.0, 0.5}, {10.0, 1.0}}; }

std::optional<double> success_rate(const std::vector<PoseError>& errors, const Threshold& t) {
  if (!(t.rotation_deg > 0.0) || !(t.translation_m > 0.0)) throw UsageError("success thresholds must be positive");
  if (errors.empty()) return std::nullopt;
  const auto hits = std::count_if(errors.begin(), errors.end(), [&](const PoseError& e) { return passes(e, t); });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(errors.size());
}

std::optional<double> auc_error(const PoseError& e) {
  if (!e.translation_angle_deg) return std::nullopt;
  return std::max(e.rotation_deg, *e.translation_angle_deg);
}

AucResult auc_at(const std::vector<PoseError>& errors, const std::vector<double>& thresholds_deg) {
  AucResult out;
  out.thresholds_deg = thresholds_deg;
  std::vector<double> scalars;
  for (const auto& e : errors) {
    if (const auto s = auc_error(e)) {
      scalars.push_back(*s);
    } else {
      ++out.excluded;
    }
  }
  for (double theta : thresholds_deg) {
    if (!(theta > 0.0)) throw UsageError("AUC thresholds must be positive");
    if (scalars.empty()) {
      out.auc_percent.emplace_back();
      continue;
    }
    double area = 0.0;
    for (double e : scalars) area += std::max(0.0, theta - e);
    out.auc_percent.emplace_back(100.0 * area / (theta * static_cast<double>(scalars.size())));
  }
  return out;
}

BinnedReport binned_report(const std::vector<PoseError>& errors, const std::vector<PairCriteria>& criteria,
                           const CriteriaBins& bins, const Threshold& t) {
  if (errors.size() != criteria.size()) throw UsageError("binned_report: one criteria record per error is required");
  bins.validate();
  BinnedReport r;
  r.threshold = t;
  auto make = [](const std::vector<double>& edges, bool percent, int decimals) {
    std::vector<BinStats> out;
    for (int i = 0; i + 1 < static_cast<int>(edges.size()); ++i) out.push_back({bin_label(edges, i, percent, decimals), 0, 0, std::nullopt});
    return out;
  };
  r.overlap = make(bins.overlap, true, 0);
  r.scale = make(bins.scale, false, 1);
  r.angle = make(bins.angle, false, 0);

  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!criteria[k].defined) {
      ++r.excluded_pairs;
      continue;
    }
    ++r.defined_pairs;
    const BinAssignment b = assign_bins(criteria[k], bins);
    const bool ok = passes(errors[k], t);
    for (BinStats* s : {&r.overlap[static_cast<std::size_t>(b.overlap)], &r.scale[static_cast<std::size_t>(b.scale)],
                        &r.angle[static_cast<std::size_t>(b.angle)]}) {
      ++s->count;
      if (ok) ++s->successes;
    }
  }
  for (auto* table : {&r.overlap, &r.scale, &r.angle})
    for (auto& s : *table)
      if (s.count > 0) s.rate = 100.0 * static_cast<double>(s.successes) / static_cast<double>(s.count);
  return r;
}

EvalReport build_report(const std::vector<std::string>& pair_ids, const std::vector<RigidPose>& gt,
                        const std::vector<RigidPose>& pred, const std::vector<Threshold>& thresholds,
                        const std::vector<PairCriteria>* criteria, const CriteriaBins& bins) {
  if (pair_ids.size() != gt.size() || gt.size() != pred.size())
    throw UsageError("build_report: pair ids, ground truth and predictions differ in length");
  EvalReport rep;
  rep.pair_ids = pair_ids;
  rep.errors.resize(gt.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < gt.size(); ++i) rep.errors[i] = pose_error(gt[i], pred[i]);
  for (const auto& t : thresholds) rep.success.emplace_back(t, success_rate(rep.errors, t));
  rep.auc = auc_at(rep.errors);
  if (criteria && !thresholds.empty()) rep.binned = binned_report(rep.errors, *criteria, bins, thresholds.front());
  return rep;
}

nlohmann::ordered_json report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["pair_count"] = report.errors.size();
  auto& success = j["success_rate"] = nlohmann::ordered_json::object();
  for (const auto& [t, rate] : report.success) success[t.label()] = optional_json(rate);
  auto& auc = j["auc"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < report.auc.thresholds_deg.size(); ++i)
    auc["AUC@" + format_number(report.auc.thresholds_deg[i])] = optional_json(report.auc.auc_percent[i]);
  j["auc_excluded_pairs"] = report.auc.excluded;
  if (report.binned) {
    const BinnedReport& b = *report.binned;
    nlohmann::ordered_json bj;
    bj["threshold"] = b.threshold.label();
    bj["defined_pairs"] = b.defined_pairs;
    bj["excluded_pairs"] = b.excluded_pairs;
    auto table = [](const std::vector<BinStats>& rows) {
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const auto& s : rows)
        arr.push_back({{"bin", s.label}, {"count", s.count}, {"successes", s.successes}, {"rate", optional_json(s.rate)}});
      return arr;
    };
    bj["overlap"] = table(b.overlap);
    bj["scale_ratio"] = table(b.scale);
    bj["viewpoint_angle"] = table(b.angle);
    j["binned"] = bj;
  }
  auto& pairs = j["pairs"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.errors.size(); ++i) {
    const auto& e = report.errors[i];
    pairs.push_back({{"id", report.pair_ids[i]},
                     {"rotation_deg", e.rotation_deg},
                     {"translation_m", e.translation_m},
                     {"translation_angle_deg", optional_json(e.translation_angle_deg)}});
  }
  return j;
}

std::string binned_report_csv(const BinnedReport& report) {
  std::ostringstream out;
  out << "criterion,bin,count,successes,rate\n";
  auto rows = [&](const char* name, const std::vector<BinStats>& table) {
    for (const auto& s : table) {
      out << name << ',' << s.label << ',' << s.count << ',' << s.successes << ',';
      if (s.rate) out << *s.rate;
      out << '\n';
    }
  };
  rows("overlap", report.overlap);
  rows("scale_ratio", report.scale);
  rows("viewpoint_angle", report.angle);
  return out.str();
}

FlowField gt_flow(const CameraFrame& src, const CameraFrame& tgt, const AnnotateOptions& opts) {
  const CovisMap map = annotate_pair(src, tgt, opts);
  const RigidPose rel = relative_pose(src.pose, tgt.pose);
  const int w = src.intrinsics.width;
  const int h = src.intrinsics.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  FlowField f{w, h, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<std::uint8_t>(n, 0)};
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (map.at(x, y) != CovisLabel::Covisible) continue;
      const double u = x + 0.5;
      const double v = y + 0.5;
      const auto proj = project(tgt.intrinsics, rel.apply(unproject(src.intrinsics, u, v, src.depth.at(x, y))));
      if (!proj) continue;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      f.du[i] = proj->u - u;
      f.dv[i] = proj->v - v;
      f.valid[i] = 1;
    }
  }
  return f;
}

std::vector<Match> correspondences_from_features(const TokenFeatures& f1, const TokenFeatures& f2, int patch_size,
                                                 int grid_width) {
  if (f1.dim != f2.dim) throw UsageError("correspondences: feature dimensions differ");
  if (patch_size <= 0 || grid_width <= 0) throw UsageError("correspondences: bad patch grid");
  const auto dim = static_cast<std::size_t>(f1.dim);
  auto row_norms = [&](const TokenFeatures& f) {
    std::vector<double> n(static_cast<std::size_t>(f.tokens));
    for (std::size_t t = 0; t < n.size(); ++t) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += f.values[t * dim + k] * f.values[t * dim + k];
      n[t] = std::sqrt(s);
    }
    return n;
  };
  const auto n1 = row_norms(f1);
  const auto n2 = row_norms(f2);
  auto center = [&](int token) {
    const int gx = token % grid_width;
    const int gy = token / grid_width;
    const double off = patch_size / 2 + 0.5;
    return std::pair<double, double>{gx * patch_size + off, gy * patch_size + off};
  };

  std::vector<Match> out(static_cast<std::size_t>(f1.tokens));
  for (int a = 0; a < f1.tokens; ++a) {
    int best = 0;
    double best_sim = -2.0;
    for (int b = 0; b < f2.tokens; ++b) {
      double dot = 0.0;
      for (std::size_t k = 0; k < dim; ++k)
        dot += f1.values[static_cast<std::size_t>(a) * dim + k] * f2.values[static_cast<std::size_t>(b) * dim + k];
      const double denom = n1[static_cast<std::size_t>(a)] * n2[static_cast<std::size_t>(b)];
      const double sim = denom > 0.0 ? dot / denom : 0.0;
      if (sim > best_sim) {
        best_sim = sim;
        best = b;
      }
    }
    const auto [su, sv] = center(a);
    const auto [tu, tv] = center(best);
    out[static_cast<std::size_t>(a)] = {a, best, su, sv, tu, tv, best_sim};
  }
  return out;
}

std::vector<Match> filter_matches(const std::vector<Match>& matches, double floor) {
  std::vector<Match> out;
  std::copy_if(matches.begin(), matches.end(), std::back_inserter(out),
               [&](const Match& m) { return m.similarity >= floor; });
  return out;
}

std::optional<double> aepe(const std::vector<Match>& matches, const FlowField& flow) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& m : matches) {
    const int x = static_cast<int>(std::floor(m.source_u));
    const int y = static_cast<int>(std::floor(m.source_v));
    if (x < 0 || y < 0 || x >= flow.width || y >= flow.height) continue;
    const std::size_t i = static_cast<std::size_t>(y) * flow.width + x;
    if (!flow.valid[i]) continue;
    const double gu = m.source_u + flow.du[i];
    const double gv = m.source_v + flow.dv[i];
    sum += std::hypot(m.target_u - gu, m.target_v - gv);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace covis::eval
