#include "covis/net/toy_data.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <random>

#include "covis/covisibility.hpp"
#include "covis/errors.hpp"

namespace covis::net {

namespace {

constexpr std::array<double, 3> kOccluderColor = {1.0, 0.0, 1.0};

std::vector<std::uint8_t> occluder_mask(int grid, int count, std::mt19937_64& rng) {
  std::vector<int> cells(static_cast<std::size_t>(grid * grid));
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  std::vector<std::uint8_t> mask(cells.size(), 0);
  const std::size_t n = std::min(static_cast<std::size_t>(std::max(count, 0)), cells.size());
  for (std::size_t i = 0; i < n; ++i) mask[static_cast<std::size_t>(cells[i])] = 1;
  return mask;
}

}  // namespace

PairSample make_shift_pair(const ModelConfig& cfg, std::uint64_t seed, const ShiftTaskConfig& task) {
  cfg.validate();
  const int G = cfg.grid();
  const int p = cfg.patch;
  if (task.min_shift < 0 || task.min_shift > task.max_shift || task.max_shift >= G) throw ConfigError("shift task: max_shift out of range");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> color(0.15, 0.85);
  std::uniform_real_distribution<double> jitter(-task.noise, task.noise);

  const int s = std::uniform_int_distribution<int>(task.min_shift, task.max_shift)(rng);
  const int strip = G + s;
  std::vector<std::array<double, 3>> world(static_cast<std::size_t>(G * strip));
  for (auto& c : world)
    for (double& ch : c) ch = color(rng);
  const auto occ1 = occluder_mask(G, task.occluders, rng);
  const auto occ2 = occluder_mask(G, task.occluders, rng);

  auto patch_color = [&](int view, int r, int c) {
    const auto& occ = view == 0 ? occ1 : occ2;
    if (occ[static_cast<std::size_t>(r * G + c)]) return kOccluderColor;
    return world[static_cast<std::size_t>(r * strip + c + (view == 0 ? 0 : s))];
  };
  // Other-view patch column showing the same content, or -1.
  auto other_col = [&](int view, int c) {
    const int oc = view == 0 ? c - s : c + s;
    return oc >= 0 && oc < G ? oc : -1;
  };

  PairSample out;
  std::vector<std::uint8_t> labels[2];
  Image imgs[2];
  for (int view = 0; view < 2; ++view) {
    const auto& own = view == 0 ? occ1 : occ2;
    const auto& other = view == 0 ? occ2 : occ1;
    Image& img = imgs[view];
    img.size = cfg.image_size;
    img.data.assign(static_cast<std::size_t>(3 * img.size * img.size), 0.0);
    labels[view].assign(static_cast<std::size_t>(img.size * img.size), 0);
    for (int r = 0; r < G; ++r)
      for (int c = 0; c < G; ++c) {
        const auto col = patch_color(view, r, c);
        const int oc = other_col(view, c);
        CovisLabel label = CovisLabel::Covisible;
        if (own[static_cast<std::size_t>(r * G + c)] || oc < 0)
          label = CovisLabel::OutsideFov;
        else if (other[static_cast<std::size_t>(r * G + oc)])
          label = CovisLabel::Occluded;
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx) {
            const int x = c * p + dx;
            const int y = r * p + dy;
            for (int ch = 0; ch < 3; ++ch) img.at(ch, x, y) = col[static_cast<std::size_t>(ch)] + jitter(rng);
            labels[view][static_cast<std::size_t>(y * img.size + x)] = static_cast<std::uint8_t>(label);
          }
      }
  }
  const int classes = cfg.classes;
  auto remap = [&](std::vector<std::uint8_t>& l) {
    if (classes == 2)
      for (auto& v : l) v = v == 0 ? 0 : 1;
  };
  remap(labels[0]);
  remap(labels[1]);
  out.tokens1 = patchify(imgs[0], p);
  out.tokens2 = patchify(imgs[1], p);
  out.labels1 = token_labels(labels[0], cfg.image_size, p, classes);
  out.labels2 = token_labels(labels[1], cfg.image_size, p, classes);
  return out;
}

std::vector<PairSample> make_shift_dataset(const ModelConfig& cfg, int count, std::uint64_t seed,
                                           const ShiftTaskConfig& task) {
  if (count <= 0) throw ConfigError("dataset size must be positive");
  std::mt19937_64 rng(seed);
  std::vector<PairSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(make_shift_pair(cfg, rng(), task));
  return out;
}

PairSample make_palette_pair(const ModelConfig& cfg, std::uint64_t seed, double noise) {
  cfg.validate();
  const int G = cfg.grid();
  const int p = cfg.patch;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> family(0, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(-noise, noise);

  PairSample out;
  for (int view = 0; view < 2; ++view) {
    Image img{cfg.image_size, std::vector<double>(static_cast<std::size_t>(3 * cfg.image_size * cfg.image_size))};
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(cfg.image_size * cfg.image_size));
    for (int r = 0; r < G; ++r)
      for (int c = 0; c < G; ++c) {
        const int f = family(rng);
        std::array<double, 3> col{};
        if (f == 0) {
          col = {0.3 * u(rng), 0.6 + 0.4 * u(rng), 0.4 * u(rng)};
        } else if (f == 1) {
          col[0] = 0.8 + 0.2 * u(rng);
          col[1] = 0.4 + 0.2 * u(rng);
          col[2] = 0.2 * u(rng);
        } else {
          const double gray = 0.3 + 0.4 * u(rng);
          col = {gray, gray, gray};
        }
        const std::uint8_t label = cfg.classes == 2 && f > 0 ? 1 : static_cast<std::uint8_t>(f);
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx) {
            const int x = c * p + dx;
            const int y = r * p + dy;
            for (int ch = 0; ch < 3; ++ch) img.at(ch, x, y) = col[static_cast<std::size_t>(ch)] + jitter(rng);
            labels[static_cast<std::size_t>(y * cfg.image_size + x)] = label;
          }
      }
    (view == 0 ? out.tokens1 : out.tokens2) = patchify(img, p);
    (view == 0 ? out.labels1 : out.labels2) = token_labels(labels, cfg.image_size, p, cfg.classes);
  }
  return out;
}

std::vector<PairSample> make_palette_dataset(const ModelConfig& cfg, int count, std::uint64_t seed, double noise) {
  if (count <= 0) throw ConfigError("dataset size must be positive");
  std::mt19937_64 rng(seed);
  std::vector<PairSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(make_palette_pair(cfg, rng(), noise));
  return out;
}

CameraIntrinsics toy_intrinsics(int size) {
  const CameraIntrinsics d = synth::default_intrinsics();
  const double f = d.fx * size / d.width;
  return {f, f, size / 2.0, size / 2.0, size, size};
}

Image to_image(const synth::ColorImage& img) {
  if (img.width != img.height) throw ConfigError("toy images must be square");
  return {img.width, img.data};
}

std::vector<PoseSample> make_pose_dataset(const ModelConfig& cfg, int count, std::uint64_t seed) {
  cfg.validate();
  if (count <= 0) throw ConfigError("dataset size must be positive");
  const CameraIntrinsics K = toy_intrinsics(cfg.image_size);
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
  for (auto& s : seeds) s = rng();

  std::vector<PoseSample> out(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) try {
    const synth::SceneSpec scene = synth::sample_scene(seeds[static_cast<std::size_t>(i)], K);
    PoseSample& ps = out[static_cast<std::size_t>(i)];
    ps.frame1 = synth::make_frame(scene, 0);
    ps.frame2 = synth::make_frame(scene, 1);
    ps.rel = relative_pose(ps.frame1.pose, ps.frame2.pose);
    const Image img1 = to_image(synth::render_color(scene.primitives, scene.cameras[0]));
    const Image img2 = to_image(synth::render_color(scene.primitives, scene.cameras[1]));
    ps.sample.tokens1 = patchify(img1, cfg.patch);
    ps.sample.tokens2 = patchify(img2, cfg.patch);
    const ClassScheme scheme = cfg.classes == 3 ? ClassScheme::ThreeClass : ClassScheme::CovisibleOrNot;
    auto labels = [&](const CameraFrame& a, const CameraFrame& b) {
      const CovisMap m = remap_classes(annotate_pair(a, b), scheme);
      std::vector<std::uint8_t> raw(m.size());
      std::transform(m.labels().begin(), m.labels().end(), raw.begin(),
                     [](CovisLabel l) { return static_cast<std::uint8_t>(l); });
      return token_labels(raw, cfg.image_size, cfg.patch, cfg.classes);
    };
    ps.sample.labels1 = labels(ps.frame1, ps.frame2);
    ps.sample.labels2 = labels(ps.frame2, ps.frame1);
    ps.sample.pose = pose_target(ps.rel);
  } catch (...) {
    errors[static_cast<std::size_t>(i)] = std::current_exception();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace covis::net
