#include "covis/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

#include "covis/errors.hpp"
#include "covis/formats.hpp"

namespace covis {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; });
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != N) throw ConfigError(where + ": expected " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = j[i].get<double>();
  return out;
}

Vec3 vec3_from(const json& j, const std::string& where) {
  const auto a = fixed_array<3>(j, where);
  return {a[0], a[1], a[2]};
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

FrameRecord parse_frame(const json& j, const fs::path& base) {
  reject_unknown_keys(j, {"id", "intrinsics", "pose", "depth", "image"}, "frame");
  FrameRecord f;
  f.id = j.at("id").get<std::string>();
  const std::string where = "frame '" + f.id + "'";
  const json& k = j.at("intrinsics");
  reject_unknown_keys(k, {"fx", "fy", "cx", "cy", "width", "height"}, where + " intrinsics");
  f.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                  k.at("cy").get<double>(), k.at("width").get<int>(),  k.at("height").get<int>()};
  const json& p = j.at("pose");
  reject_unknown_keys(p, {"q", "t"}, where + " pose");
  f.pose.rotation = quat_normalize(fixed_array<4>(p.at("q"), where + " pose.q"));
  f.pose.translation = vec3_from(p.at("t"), where + " pose.t");
  f.depth_path = base / j.at("depth").get<std::string>();
  if (j.contains("image")) f.image_path = base / j.at("image").get<std::string>();
  return f;
}

std::string relative_or_absolute(const fs::path& p, const fs::path& base) {
  if (base.empty()) return p.generic_string();
  const fs::path rel = p.lexically_relative(base);
  return rel.empty() ? p.generic_string() : rel.generic_string();
}

std::string map_name(const std::string& scene, const std::string& a, const std::string& b) {
  return "maps/" + scene + "_" + a + "_" + b + ".cub3";
}

}  // namespace

void SceneManifest::validate() const {
  if (scene_id.empty()) throw ConfigError("manifest: empty scene_id");
  std::set<std::string> ids;
  for (const auto& f : frames) {
    if (!ids.insert(f.id).second) throw ConfigError("manifest: duplicate frame id '" + f.id + "'");
    try {
      f.intrinsics.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("manifest: frame '" + f.id + "': " + e.what());
    }
  }
}

int SceneManifest::frame_index(const std::string& id) const {
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].id == id) return static_cast<int>(i);
  return -1;
}

SceneManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
  SceneManifest m;
  m.base_dir = path.parent_path();
  try {
    reject_unknown_keys(j, {"scene_id", "split", "frames", "primitives"}, "manifest");
    m.scene_id = j.at("scene_id").get<std::string>();
    const std::string split = j.at("split").get<std::string>();
    if (split == "train") {
      m.split = Split::Train;
    } else if (split == "test") {
      m.split = Split::Test;
    } else {
      throw ConfigError("manifest: split must be 'train' or 'test'");
    }
    for (const auto& f : j.at("frames")) m.frames.push_back(parse_frame(f, m.base_dir));
    if (j.contains("primitives")) {
      for (const auto& p : j.at("primitives")) {
        reject_unknown_keys(p, {"lo", "hi"}, "primitive");
        m.primitives.push_back({vec3_from(p.at("lo"), "primitive.lo"), vec3_from(p.at("hi"), "primitive.hi")});
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const fs::path& path, const SceneManifest& m) {
  m.validate();
  const fs::path base = path.parent_path();
  nlohmann::ordered_json j;
  j["scene_id"] = m.scene_id;
  j["split"] = to_string(m.split);
  j["frames"] = nlohmann::ordered_json::array();
  for (const auto& f : m.frames) {
    nlohmann::ordered_json fj;
    fj["id"] = f.id;
    fj["intrinsics"] = {{"fx", f.intrinsics.fx}, {"fy", f.intrinsics.fy}, {"cx", f.intrinsics.cx},
                        {"cy", f.intrinsics.cy}, {"width", f.intrinsics.width}, {"height", f.intrinsics.height}};
    fj["pose"] = {{"q", f.pose.rotation.wxyz()}, {"t", vec3_json(f.pose.translation)}};
    fj["depth"] = relative_or_absolute(f.depth_path, base);
    if (f.image_path) fj["image"] = relative_or_absolute(*f.image_path, base);
    j["frames"].push_back(fj);
  }
  if (!m.primitives.empty()) {
    j["primitives"] = nlohmann::ordered_json::array();
    for (const auto& p : m.primitives) j["primitives"].push_back({{"lo", vec3_json(p.lo)}, {"hi", vec3_json(p.hi)}});
  }
  if (!base.empty()) fs::create_directories(base);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

CameraFrame load_frame(const FrameRecord& record) {
  CameraFrame frame{record.intrinsics, record.pose, read_pfm(record.depth_path)};
  frame.validate();
  return frame;
}

std::vector<std::pair<int, int>> enumerate_pairs(int frame_count) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < frame_count; ++i)
    for (int j = i + 1; j < frame_count; ++j) pairs.emplace_back(i, j);
  return pairs;
}

std::vector<std::pair<int, int>> enumerate_pairs(const SceneManifest& manifest) {
  return enumerate_pairs(static_cast<int>(manifest.frames.size()));
}

std::vector<PairRecord> filter_by_overlap(const std::vector<PairRecord>& records, double threshold) {
  std::vector<PairRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out), [&](const PairRecord& r) {
    return r.criteria.defined && r.criteria.overlap >= threshold;
  });
  return out;
}

std::vector<PairRecord> subsample_pairs(const std::vector<PairRecord>& records, std::size_t max_pairs,
                                        std::uint64_t seed) {
  if (max_pairs == 0 || records.size() <= max_pairs) return records;
  std::vector<PairRecord> out;
  out.reserve(max_pairs);
  std::mt19937_64 rng(seed);
  std::sample(records.begin(), records.end(), std::back_inserter(out), max_pairs, rng);
  return out;
}

BuildResult build_variant(const SceneManifest& manifest, const DatasetVariant& variant, const BuildOptions& opts) {
  manifest.validate();
  BuildResult result;

  const int n = static_cast<int>(manifest.frames.size());
  std::vector<std::optional<CameraFrame>> frames(static_cast<std::size_t>(n));
  std::vector<std::string> load_errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      frames[static_cast<std::size_t>(i)] = load_frame(manifest.frames[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
      load_errors[static_cast<std::size_t>(i)] = e.what();
    }
  }

  const auto pairs = enumerate_pairs(manifest);
  struct Annotated {
    PairRecord record;
    CovisMap map_ij;
    CovisMap map_ji;
    std::string error;
  };
  std::vector<Annotated> work(pairs.size());

#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    Annotated& a = work[k];
    const auto& fi = manifest.frames[static_cast<std::size_t>(i)];
    const auto& fj = manifest.frames[static_cast<std::size_t>(j)];
    a.record = {manifest.scene_id, fi.id, fj.id, i, j, {}, map_name(manifest.scene_id, fi.id, fj.id),
                map_name(manifest.scene_id, fj.id, fi.id)};
    const auto& ei = load_errors[static_cast<std::size_t>(i)];
    const auto& ej = load_errors[static_cast<std::size_t>(j)];
    if (!ei.empty() || !ej.empty()) {
      a.error = !ei.empty() ? "frame " + fi.id + ": " + ei : "frame " + fj.id + ": " + ej;
      continue;
    }
    try {
      const CameraFrame& a_frame = *frames[static_cast<std::size_t>(i)];
      const CameraFrame& b_frame = *frames[static_cast<std::size_t>(j)];
      a.map_ij = annotate_pair(a_frame, b_frame, opts.annotate);
      a.map_ji = annotate_pair(b_frame, a_frame, opts.annotate);
      a.map_ij.direction = {manifest.scene_id, fi.id, fj.id};
      a.map_ji.direction = {manifest.scene_id, fj.id, fi.id};
      a.record.criteria = compute_criteria(a_frame, b_frame, a.map_ij, a.map_ji);
      a.map_ij = remap_classes(a.map_ij, opts.scheme);
      a.map_ji = remap_classes(a.map_ji, opts.scheme);
    } catch (const std::exception& e) {
      a.error = e.what();
    }
  }

  std::vector<PairRecord> annotated;
  std::map<std::pair<int, int>, std::size_t> slot;
  for (std::size_t k = 0; k < work.size(); ++k) {
    if (!work[k].error.empty()) {
      result.skipped.push_back({manifest.scene_id, work[k].record.frame_i, work[k].record.frame_j, work[k].error});
      continue;
    }
    slot[{work[k].record.index_i, work[k].record.index_j}] = k;
    annotated.push_back(work[k].record);
  }
  result.annotated = annotated.size();
  result.records = subsample_pairs(filter_by_overlap(annotated, variant.min_overlap), opts.max_pairs, opts.seed);

  if (opts.output_dir) {
    for (const auto& r : result.records) {
      const Annotated& a = work[slot.at({r.index_i, r.index_j})];
      write_covis(*opts.output_dir / r.map_ij, a.map_ij);
      write_covis(*opts.output_dir / r.map_ji, a.map_ji);
    }
  }
  return result;
}

CovisMap inject_label_noise(const CovisMap& map, double p, std::uint64_t seed, NoiseStats* stats) {
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("label noise probability must lie in [0, 1]");
  const int classes = class_count(map.scheme);
  CovisMap out = map;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> other(1, classes - 1);
  NoiseStats s;
  for (CovisLabel& l : out.labels()) {
    if (l == CovisLabel::Ignore) continue;
    ++s.eligible;
    // Draw both numbers for every pixel so the stream does not depend on p.
    const double r = coin(rng);
    const int shift = other(rng);
    if (r < p) {
      l = static_cast<CovisLabel>((static_cast<int>(l) + shift) % classes);
      ++s.flipped;
    }
  }
  if (stats) *stats = s;
  return out;
}

CriteriaHistograms criteria_histograms(const std::vector<PairRecord>& records, const CriteriaBins& bins) {
  bins.validate();
  CriteriaHistograms h{std::vector<std::size_t>(bins.overlap.size() - 1, 0),
                       std::vector<std::size_t>(bins.scale.size() - 1, 0),
                       std::vector<std::size_t>(bins.angle.size() - 1, 0), 0};
  for (const auto& r : records) {
    if (!r.criteria.defined) {
      ++h.undefined;
      continue;
    }
    const BinAssignment b = assign_bins(r.criteria, bins);
    ++h.overlap[static_cast<std::size_t>(b.overlap)];
    ++h.scale[static_cast<std::size_t>(b.scale)];
    ++h.angle[static_cast<std::size_t>(b.angle)];
  }
  return h;
}

std::vector<SplitViolation> split_check(const std::vector<SceneManifest>& manifests) {
  std::map<std::string, std::set<Split>> seen;
  for (const auto& m : manifests) seen[m.scene_id].insert(m.split);
  std::vector<SplitViolation> out;
  for (const auto& [id, splits] : seen)
    if (splits.size() > 1) out.push_back({id});
  return out;
}

void write_pair_index(const fs::path& path, const std::vector<PairRecord>& records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["scene"] = r.scene;
    j["i"] = r.frame_i;
    j["j"] = r.frame_j;
    j["index_i"] = r.index_i;
    j["index_j"] = r.index_j;
    j["defined"] = r.criteria.defined;
    if (r.criteria.defined) {
      j["overlap"] = r.criteria.overlap;
      j["scale_ratio"] = r.criteria.scale_ratio;
      j["viewpoint_angle"] = r.criteria.viewpoint_angle;
    } else {
      j["overlap"] = nullptr;
      j["scale_ratio"] = nullptr;
      j["viewpoint_angle"] = nullptr;
    }
    j["map_ij"] = r.map_ij;
    j["map_ji"] = r.map_ji;
    out << j.dump() << "\n";
  }
}

std::vector<PairRecord> read_pair_index(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pair index " + path.string());
  std::vector<PairRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      reject_unknown_keys(j, {"scene", "i", "j", "index_i", "index_j", "defined", "overlap", "scale_ratio",
                              "viewpoint_angle", "map_ij", "map_ji"},
                          "pair record");
      PairRecord r;
      r.scene = j.at("scene").get<std::string>();
      r.frame_i = j.at("i").get<std::string>();
      r.frame_j = j.at("j").get<std::string>();
      r.index_i = j.at("index_i").get<int>();
      r.index_j = j.at("index_j").get<int>();
      r.criteria.defined = j.at("defined").get<bool>();
      if (r.criteria.defined) {
        r.criteria.overlap = j.at("overlap").get<double>();
        r.criteria.scale_ratio = j.at("scale_ratio").get<double>();
        r.criteria.viewpoint_angle = j.at("viewpoint_angle").get<double>();
      }
      r.map_ij = j.at("map_ij").get<std::string>();
      r.map_ji = j.at("map_ji").get<std::string>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

SceneManifest write_synthetic_scene(const fs::path& dir, const std::string& scene_id, std::uint64_t seed,
                                    int frame_count, Split split, const CameraIntrinsics& K) {
  if (frame_count < 1) throw UsageError("synthetic scene needs at least one frame");
  const synth::SceneSpec scene = synth::sample_scene(seed, K);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double heading = unit(rng) * 0.8;
  const double yaw_rate = unit(rng) * 8.0;

  SceneManifest m;
  m.scene_id = scene_id;
  m.split = split;
  m.primitives = scene.primitives;
  m.base_dir = dir;
  fs::create_directories(dir / "depth");
  fs::create_directories(dir / "image");

  for (int k = 0; k < frame_count; ++k) {
    const double step = 0.3 * k;
    Vec3 center(step * std::cos(heading), 0.05 * unit(rng), step * std::sin(heading) * 0.5);
    const double yaw = yaw_rate * k + 2.0 * unit(rng);
    for (const auto& prim : scene.primitives)
      if (prim.contains(center)) center.y() -= 1.0;
    const synth::CameraPlacement cam{K, {UnitQuaternion::from_axis_angle(Vec3::UnitY(), yaw), center}};

    char id[16];
    std::snprintf(id, sizeof id, "%03d", k);
    FrameRecord f{id, K, cam.pose, dir / "depth" / (std::string(id) + ".pfm"),
                  dir / "image" / (std::string(id) + ".ppm")};
    write_pfm(f.depth_path, synth::render_depth(scene.primitives, cam));

    const synth::ColorImage color = synth::render_color(scene.primitives, cam);
    RgbImage rgb{K.width, K.height, std::vector<std::uint8_t>(static_cast<std::size_t>(K.width) * K.height * 3)};
    for (int y = 0; y < K.height; ++y)
      for (int x = 0; x < K.width; ++x)
        for (int c = 0; c < 3; ++c)
          rgb.rgb[(static_cast<std::size_t>(y) * K.width + x) * 3 + c] =
              static_cast<std::uint8_t>(std::lround(std::clamp(color.at(c, x, y), 0.0, 1.0) * 255.0));
    write_ppm(*f.image_path, rgb);
    m.frames.push_back(std::move(f));
  }
  save_manifest(dir / "scene.json", m);
  return m;
}

}  // namespace covis
