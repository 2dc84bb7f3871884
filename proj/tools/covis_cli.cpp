// covis: annotate, stats, train, finetune, eval, viz, synth.
//
// Exit codes: 0 success, 1 configuration or fatal error, 2 partial success
// (some pairs skipped).

#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "covis/datapipe.hpp"
#include "covis/errors.hpp"
#include "covis/evalharness.hpp"
#include "covis/formats.hpp"
#include "covis/net/checkpoint.hpp"
#include "covis/net/toy_data.hpp"
#include "covis/net/train.hpp"

namespace fs = std::filesystem;
using namespace covis;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;

bool verbose() {
  const char* v = std::getenv("COVIS_VERBOSE");
  return v != nullptr && std::string(v) != "0";
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

const std::map<std::string, ClassScheme> kSchemes = {{"three", ClassScheme::ThreeClass},
                                                     {"covisible", ClassScheme::CovisibleOrNot},
                                                     {"fov", ClassScheme::InsideFovOrNot}};
const std::map<std::string, InvalidTargetPolicy> kPolicies = {{"occluded", InvalidTargetPolicy::Occluded},
                                                              {"covisible", InvalidTargetPolicy::Covisible},
                                                              {"ignore", InvalidTargetPolicy::Ignore}};

// annotate ------------------------------------------------------------------

struct AnnotateArgs {
  fs::path manifest;
  fs::path out;
  double min_overlap = 0.05;
  std::string variant;
  std::size_t max_pairs = 0;
  std::uint64_t seed = 0;
  ClassScheme scheme = ClassScheme::ThreeClass;
  double rel_tol = 0.01;
  double abs_tol = 0.05;
  InvalidTargetPolicy policy = InvalidTargetPolicy::Occluded;
};

int run_annotate(const AnnotateArgs& a) {
  require_file(a.manifest, "manifest");
  if (a.min_overlap < 0.0 || a.min_overlap > 1.0) throw ConfigError("--min-overlap must lie in [0, 1]");
  if (a.rel_tol < 0.0 || a.abs_tol < 0.0) throw ConfigError("tolerances must be non-negative");
  const SceneManifest m = load_manifest(a.manifest);

  DatasetVariant variant{a.variant, a.min_overlap};
  if (variant.name.empty()) variant.name = "overlap-" + std::to_string(static_cast<int>(std::lround(a.min_overlap * 100)));
  BuildOptions opts;
  opts.annotate.tolerance = {a.rel_tol, a.abs_tol};
  opts.annotate.invalid_target_policy = a.policy;
  opts.scheme = a.scheme;
  opts.seed = a.seed;
  opts.max_pairs = a.max_pairs;
  opts.output_dir = a.out;
  const BuildResult r = build_variant(m, variant, opts);

  write_pair_index(a.out / "pairs.jsonl", r.records);
  std::string skipped;
  for (const auto& s : r.skipped) {
    nlohmann::ordered_json j;
    j["scene"] = s.scene;
    j["i"] = s.frame_i;
    j["j"] = s.frame_j;
    j["reason"] = s.reason;
    skipped += j.dump() + "\n";
    std::cerr << "skipped " << s.scene << " " << s.frame_i << "-" << s.frame_j << ": " << s.reason << "\n";
  }
  write_text(a.out / "skipped.jsonl", skipped);
  std::cout << variant.name << ": annotated " << r.annotated << " pairs, kept " << r.records.size() << ", skipped "
            << r.skipped.size() << "\n";
  return r.skipped.empty() ? kExitOk : kExitPartial;
}

// stats ---------------------------------------------------------------------

int run_stats(const fs::path& index, const fs::path& out) {
  require_file(index, "pair index");
  const auto records = read_pair_index(index);
  const CriteriaBins bins;
  const CriteriaHistograms h = criteria_histograms(records, bins);

  nlohmann::ordered_json j;
  j["pairs"] = records.size();
  j["undefined"] = h.undefined;
  std::string csv = "criterion,bin,count\n";
  auto emit = [&](const char* name, const std::vector<double>& edges, const std::vector<std::size_t>& counts,
                  bool percent, int decimals) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const std::string label = bin_label(edges, static_cast<int>(i), percent, decimals);
      arr.push_back({{"bin", label}, {"count", counts[i]}});
      csv += std::string(name) + "," + label + "," + std::to_string(counts[i]) + "\n";
    }
    j[name] = arr;
  };
  emit("overlap", bins.overlap, h.overlap, true, 0);
  emit("scale", bins.scale, h.scale, false, 1);
  emit("angle", bins.angle, h.angle, false, 0);
  write_text(out / "stats.json", j.dump(2) + "\n");
  write_text(out / "stats.csv", csv);
  std::cout << "stats over " << records.size() << " pairs\n";
  return kExitOk;
}

// train / finetune ----------------------------------------------------------

struct ModelArgs {
  int image_size = 32;
  int patch = 8;
  int dim = 32;
  int enc_layers = 2;
  int dec_layers = 2;
  int heads = 2;
  int classes = 3;
  bool align_sign = false;

  net::ModelConfig config() const {
    net::ModelConfig c;
    c.image_size = image_size;
    c.patch = patch;
    c.dim = dim;
    c.enc_layers = enc_layers;
    c.dec_layers = dec_layers;
    c.heads = heads;
    c.classes = classes;
    c.align_quat_sign = align_sign;
    c.validate();
    return c;
  }
};

void add_model_flags(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--image-size", m.image_size, "Square image size in pixels")->capture_default_str();
  cmd->add_option("--patch", m.patch, "Patch size")->capture_default_str();
  cmd->add_option("--dim", m.dim, "Embedding dimension")->capture_default_str();
  cmd->add_option("--enc-layers", m.enc_layers, "Encoder blocks")->capture_default_str();
  cmd->add_option("--dec-layers", m.dec_layers, "Decoder blocks")->capture_default_str();
  cmd->add_option("--heads", m.heads, "Attention heads")->capture_default_str();
  cmd->add_option("--classes", m.classes, "Segmentation classes (2 or 3)")->capture_default_str();
  cmd->add_flag("--align-quat-sign", m.align_sign, "Sign-align the GT quaternion to the prediction");
}

class JsonlLog {
 public:
  explicit JsonlLog(const fs::path& path) {
    fs::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw ConfigError("cannot write " + path.string());
  }
  void operator()(const net::LogRecord& r) { out_ << net::to_json(r).dump() << "\n"; }

 private:
  std::ofstream out_;
};

struct TrainArgs {
  ModelArgs model;
  fs::path out;
  std::string task = "palette";
  int pairs = 256;
  int steps = 400;
  int warmup = 40;
  double lr = 1e-3;
  double weight_decay = 0.05;
  int batch = 8;
  std::uint64_t seed = 0;
};

int run_train(const TrainArgs& a) {
  const net::ModelConfig cfg = a.model.config();
  if (a.pairs <= 0) throw ConfigError("--pairs must be positive");
  const auto data = a.task == "palette" ? net::make_palette_dataset(cfg, a.pairs, a.seed)
                                        : net::make_shift_dataset(cfg, a.pairs, a.seed);
  net::ModelParameters params = net::ModelParameters::init(cfg, a.seed);
  JsonlLog log(a.out / "train_log.jsonl");
  const net::PretrainConfig pc{a.steps, a.warmup, a.lr, a.weight_decay, a.batch, a.seed};
  const auto records = net::pretrain(params, data, pc, [&](const net::LogRecord& r) {
    log(r);
    if (verbose()) std::cerr << net::to_json(r).dump() << "\n";
  });
  net::save_checkpoint(a.out / "model.a0rc", params);
  const auto acc = net::pixel_accuracy(params, data);
  std::cout << "final L_ce " << records.back().loss.ce << ", train pixel accuracy " << acc.value_or(0.0) << "\n";
  return kExitOk;
}

struct FinetuneArgs {
  ModelArgs model;
  std::optional<fs::path> checkpoint;
  fs::path out;
  int pairs = 64;
  net::FinetuneConfig ft;
  std::uint64_t data_seed = 0;
};

net::ModelParameters load_or_init(const std::optional<fs::path>& checkpoint, const ModelArgs& m, std::uint64_t seed) {
  if (!checkpoint) return net::ModelParameters::init(m.config(), seed);
  require_file(*checkpoint, "checkpoint");
  return net::load_checkpoint(*checkpoint);
}

int run_finetune(const FinetuneArgs& a) {
  net::ModelParameters params = load_or_init(a.checkpoint, a.model, a.ft.seed);
  const net::ModelConfig& cfg = params.config();
  if (a.pairs <= 0) throw ConfigError("--pairs must be positive");
  const auto pose = net::make_pose_dataset(cfg, a.pairs, a.data_seed);
  std::vector<net::PairSample> data;
  for (const auto& p : pose) data.push_back(p.sample);
  JsonlLog log(a.out / "finetune_log.jsonl");
  const auto r = net::finetune(params, data, a.ft, [&](const net::LogRecord& rec) {
    log(rec);
    if (verbose()) std::cerr << net::to_json(rec).dump() << "\n";
  });
  net::save_checkpoint(a.out / "model.a0rc", params);
  std::cout << "phase 1: " << r.phase1_steps << " steps, phase 2: " << r.phase2_steps << " steps\n";
  return kExitOk;
}

// eval ----------------------------------------------------------------------

struct PoseFileEntry {
  std::string pair;
  RigidPose pose;
};

std::vector<PoseFileEntry> read_poses(const fs::path& path) {
  require_file(path, "pose file");
  std::ifstream in(path);
  std::vector<PoseFileEntry> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      for (const auto& [key, _] : j.items())
        if (key != "pair" && key != "q" && key != "t") throw ConfigError("unknown key '" + key + "'");
      const auto q = j.at("q").get<std::vector<double>>();
      const auto t = j.at("t").get<std::vector<double>>();
      if (q.size() != 4 || t.size() != 3) throw ConfigError("q needs 4 values and t 3");
      PoseFileEntry e;
      e.pair = j.at("pair").get<std::string>();
      e.pose.rotation = quat_normalize({q[0], q[1], q[2], q[3]});
      e.pose.translation = Vec3(t[0], t[1], t[2]);
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::string pair_id(const PairRecord& r) { return r.scene + "/" + r.frame_i + "/" + r.frame_j; }

struct EvalArgs {
  std::optional<fs::path> gt;
  std::optional<fs::path> pred;
  std::optional<fs::path> index;
  std::optional<fs::path> checkpoint;
  int synthetic = 0;
  std::uint64_t seed = 0;
  std::string thresholds = "outdoor";
  fs::path out;
};

int run_eval(const EvalArgs& a) {
  const std::vector<eval::Threshold> thresholds =
      a.thresholds == "indoor" ? eval::default_indoor_thresholds() : eval::default_outdoor_thresholds();
  std::vector<std::string> ids;
  std::vector<RigidPose> gt;
  std::vector<RigidPose> pred;
  std::vector<PairCriteria> criteria;
  bool have_criteria = false;

  if (a.checkpoint) {
    if (a.gt || a.pred || a.index) throw ConfigError("--checkpoint cannot be combined with --gt/--pred/--index");
    if (a.synthetic <= 0) throw ConfigError("--checkpoint needs --synthetic N");
    require_file(*a.checkpoint, "checkpoint");
    const net::ModelParameters params = net::load_checkpoint(*a.checkpoint);
    const auto samples = net::make_pose_dataset(params.config(), a.synthetic, a.seed);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      ids.push_back("synthetic/" + std::to_string(i));
      gt.push_back(s.rel);
      pred.push_back(net::predict_pose(params, s.sample));
      criteria.push_back(compute_criteria(s.frame1, s.frame2, annotate_pair(s.frame1, s.frame2),
                                          annotate_pair(s.frame2, s.frame1)));
    }
    have_criteria = true;
  } else {
    if (!a.gt || !a.pred) throw ConfigError("eval needs --gt and --pred, or --checkpoint");
    const auto g = read_poses(*a.gt);
    const auto p = read_poses(*a.pred);
    std::map<std::string, RigidPose> by_id;
    for (const auto& e : p)
      if (!by_id.emplace(e.pair, e.pose).second) throw ConfigError("duplicate prediction for " + e.pair);
    std::map<std::string, PairCriteria> crit;
    if (a.index) {
      require_file(*a.index, "pair index");
      for (const auto& r : read_pair_index(*a.index)) crit[pair_id(r)] = r.criteria;
      have_criteria = true;
    }
    for (const auto& e : g) {
      auto it = by_id.find(e.pair);
      if (it == by_id.end()) throw ConfigError("no prediction for " + e.pair);
      ids.push_back(e.pair);
      gt.push_back(e.pose);
      pred.push_back(it->second);
      if (have_criteria) {
        auto c = crit.find(e.pair);
        criteria.push_back(c == crit.end() ? PairCriteria{} : c->second);
      }
    }
  }

  const eval::EvalReport report =
      eval::build_report(ids, gt, pred, thresholds, have_criteria ? &criteria : nullptr);
  write_text(a.out / "report.json", eval::report_to_json(report).dump(2) + "\n");
  if (report.binned) write_text(a.out / "binned.csv", eval::binned_report_csv(*report.binned));
  for (const auto& [t, rate] : report.success)
    std::cout << t.label() << ": " << (rate ? std::to_string(*rate) : std::string("n/a")) << "\n";
  return kExitOk;
}

// viz / synth ---------------------------------------------------------------

int run_viz(const fs::path& map_path, const std::optional<fs::path>& image, const fs::path& out) {
  require_file(map_path, "covisibility map");
  const CovisMap map = read_covis(map_path);
  std::optional<RgbImage> src;
  if (image) {
    require_file(*image, "image");
    src = read_ppm(*image);
    if (src->width != map.width() || src->height != map.height())
      throw ConfigError("image size does not match the map");
  }
  write_ppm(out, render_overlay(map, src));
  return kExitOk;
}

struct SynthArgs {
  fs::path out;
  std::string scene_id = "synth";
  std::uint64_t seed = 0;
  int frames = 4;
  std::string split = "train";
};

int run_synth(const SynthArgs& a) {
  const Split split = a.split == "test" ? Split::Test : Split::Train;
  const SceneManifest m = write_synthetic_scene(a.out, a.scene_id, a.seed, a.frames, split);
  std::cout << "wrote " << m.frames.size() << " frames to " << a.out.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covisibility annotation, toy training and pose evaluation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: all available)")->check(CLI::NonNegativeNumber);

  AnnotateArgs an;
  auto* annotate = app.add_subcommand("annotate", "Annotate all frame pairs of a scene and write a pair index");
  annotate->add_option("--manifest", an.manifest, "Scene manifest (scene.json)")->required();
  annotate->add_option("--out", an.out, "Output directory")->required();
  annotate->add_option("--min-overlap", an.min_overlap, "Keep pairs with at least this overlap")->capture_default_str();
  annotate->add_option("--variant", an.variant, "Variant name (default overlap-<percent>)");
  annotate->add_option("--max-pairs", an.max_pairs, "Uniform subsample size, 0 keeps all")->capture_default_str();
  annotate->add_option("--seed", an.seed, "Subsampling seed")->capture_default_str();
  annotate->add_option("--scheme", an.scheme, "Class scheme: three, covisible, fov")
      ->transform(CLI::CheckedTransformer(kSchemes, CLI::ignore_case));
  annotate->add_option("--rel-tol", an.rel_tol, "Relative depth tolerance")->capture_default_str();
  annotate->add_option("--abs-tol", an.abs_tol, "Absolute depth tolerance in meters")->capture_default_str();
  annotate->add_option("--invalid-target", an.policy, "Label for projections onto invalid target depth")
      ->transform(CLI::CheckedTransformer(kPolicies, CLI::ignore_case));

  fs::path stats_index, stats_out;
  auto* stats = app.add_subcommand("stats", "Criteria histograms of a pair index");
  stats->add_option("--index", stats_index, "Pair index (pairs.jsonl)")->required();
  stats->add_option("--out", stats_out, "Output directory")->required();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Toy covisibility pretraining");
  train->add_option("--out", tr.out, "Output directory")->required();
  train->add_option("--task", tr.task, "Toy task: palette or shift")
      ->check(CLI::IsMember({"palette", "shift"}))
      ->capture_default_str();
  train->add_option("--pairs", tr.pairs, "Training pairs")->capture_default_str();
  train->add_option("--steps", tr.steps, "Optimizer steps")->capture_default_str();
  train->add_option("--warmup", tr.warmup, "Warmup steps")->capture_default_str();
  train->add_option("--lr", tr.lr, "Peak learning rate")->capture_default_str();
  train->add_option("--weight-decay", tr.weight_decay, "AdamW weight decay")->capture_default_str();
  train->add_option("--batch", tr.batch, "Pairs per step")->capture_default_str();
  train->add_option("--seed", tr.seed, "Data, init and shuffling seed")->capture_default_str();
  add_model_flags(train, tr.model);

  FinetuneArgs ft;
  auto* finetune = app.add_subcommand("finetune", "Two-phase pose fine-tuning on synthetic renders");
  finetune->add_option("--checkpoint", ft.checkpoint, "Starting checkpoint (default: fresh init)");
  finetune->add_option("--out", ft.out, "Output directory")->required();
  finetune->add_option("--pairs", ft.pairs, "Synthetic training pairs")->capture_default_str();
  finetune->add_option("--phase1-epochs", ft.ft.phase1_epochs, "Frozen-backbone epochs")->capture_default_str();
  finetune->add_option("--phase2-epochs", ft.ft.phase2_epochs, "Joint epochs")->capture_default_str();
  finetune->add_option("--phase1-lr", ft.ft.phase1_lr, "Phase 1 peak learning rate")->capture_default_str();
  finetune->add_option("--phase2-lr", ft.ft.phase2_lr, "Phase 2 peak learning rate")->capture_default_str();
  finetune->add_option("--warmup-epochs", ft.ft.warmup_epochs, "Warmup epochs per phase")->capture_default_str();
  finetune->add_option("--weight-decay", ft.ft.weight_decay, "AdamW weight decay")->capture_default_str();
  finetune->add_option("--batch", ft.ft.batch, "Pairs per step")->capture_default_str();
  finetune->add_option("--seed", ft.ft.seed, "Init and shuffling seed")->capture_default_str();
  finetune->add_option("--data-seed", ft.data_seed, "Synthetic data seed")->capture_default_str();
  add_model_flags(finetune, ft.model);

  EvalArgs ev;
  auto* evalcmd = app.add_subcommand("eval", "Relative pose evaluation report");
  evalcmd->add_option("--gt", ev.gt, "Ground-truth poses (JSONL: pair, q, t)");
  evalcmd->add_option("--pred", ev.pred, "Predicted poses (JSONL: pair, q, t)");
  evalcmd->add_option("--index", ev.index, "Pair index for criteria bins");
  evalcmd->add_option("--checkpoint", ev.checkpoint, "Evaluate a model on synthetic pairs instead");
  evalcmd->add_option("--synthetic", ev.synthetic, "Synthetic pair count for --checkpoint");
  evalcmd->add_option("--seed", ev.seed, "Synthetic data seed")->capture_default_str();
  evalcmd->add_option("--thresholds", ev.thresholds, "Threshold set: outdoor or indoor")
      ->check(CLI::IsMember({"outdoor", "indoor"}))
      ->capture_default_str();
  evalcmd->add_option("--out", ev.out, "Output directory")->required();

  fs::path viz_map, viz_out;
  std::optional<fs::path> viz_image;
  auto* viz = app.add_subcommand("viz", "Render a covisibility map as a PPM overlay");
  viz->add_option("--map", viz_map, "CUB3 map")->required();
  viz->add_option("--image", viz_image, "Source PPM to blend under the labels");
  viz->add_option("--out", viz_out, "Output PPM")->required();

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Write a synthetic scene (manifest, depth, images)");
  synth->add_option("--out", sy.out, "Output directory")->required();
  synth->add_option("--scene-id", sy.scene_id, "Scene id")->capture_default_str();
  synth->add_option("--seed", sy.seed, "Scene seed")->capture_default_str();
  synth->add_option("--frames", sy.frames, "Frame count")->capture_default_str();
  synth->add_option("--split", sy.split, "train or test")->check(CLI::IsMember({"train", "test"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*annotate) return run_annotate(an);
    if (*stats) return run_stats(stats_index, stats_out);
    if (*train) return run_train(tr);
    if (*finetune) return run_finetune(ft);
    if (*evalcmd) return run_eval(ev);
    if (*viz) return run_viz(viz_map, viz_image, viz_out);
    if (*synth) return run_synth(sy);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
