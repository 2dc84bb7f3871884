#include "covis/net/model.hpp"

#include <cmath>
#include <random>

#include "covis/errors.hpp"

namespace covis::net {

void ModelConfig::validate() const {
  if (image_size <= 0 || patch <= 0 || image_size % patch != 0)
    throw ConfigError("image size must be a positive multiple of the patch size");
  if (dim <= 0 || heads <= 0 || dim % heads != 0) throw ConfigError("dim must be divisible by heads");
  if (enc_layers < 0 || dec_layers < 0) throw ConfigError("negative layer count");
  if (classes != 2 && classes != 3) throw ConfigError("class count must be 2 or 3");
  if (mlp_ratio <= 0) throw ConfigError("mlp ratio must be positive");
}

ModelConfig ModelConfig::full_scale() {
  ModelConfig c;
  c.image_size = 224;
  c.patch = 16;
  c.dim = 768;
  c.enc_layers = 24;
  c.dec_layers = 12;
  c.heads = 12;
  return c;
}

void ModelParameters::add(std::string name, ParamGroup group, int rows, int cols, bool decay) {
  by_name_.emplace(name, static_cast<int>(values.size()));
  values.emplace_back(rows, cols, 0.0);
  info.push_back({std::move(name), group, decay});
}

ModelParameters ModelParameters::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParameters p;
  p.cfg_ = cfg;
  const int d = cfg.dim;
  const int hidden = d * cfg.mlp_ratio;

  auto linear = [&](const std::string& pfx, ParamGroup g, int in, int out) {
    p.add(pfx + ".w", g, in, out, true);
    p.add(pfx + ".b", g, 1, out, false);
  };
  auto norm = [&](const std::string& pfx, ParamGroup g) {
    p.add(pfx + ".g", g, 1, d, false);
    p.add(pfx + ".b", g, 1, d, false);
  };
  auto attn = [&](const std::string& pfx, ParamGroup g) {
    for (const char* m : {"q", "k", "v", "o"}) linear(pfx + "." + m, g, d, d);
  };
  auto mlp = [&](const std::string& pfx, ParamGroup g, int in, int mid, int out) {
    linear(pfx + ".fc1", g, in, mid);
    linear(pfx + ".fc2", g, mid, out);
  };

  linear("embed", ParamGroup::Encoder, cfg.token_len(), d);
  p.add("pos", ParamGroup::Encoder, cfg.tokens(), d, false);
  for (int l = 0; l < cfg.enc_layers; ++l) {
    const std::string pfx = "enc." + std::to_string(l);
    norm(pfx + ".ln1", ParamGroup::Encoder);
    attn(pfx + ".attn", ParamGroup::Encoder);
    norm(pfx + ".ln2", ParamGroup::Encoder);
    mlp(pfx + ".mlp", ParamGroup::Encoder, d, hidden, d);
  }
  norm("enc.norm", ParamGroup::Encoder);
  for (int l = 0; l < cfg.dec_layers; ++l) {
    const std::string pfx = "dec." + std::to_string(l);
    norm(pfx + ".ln1", ParamGroup::Decoder);
    attn(pfx + ".self", ParamGroup::Decoder);
    norm(pfx + ".ln2", ParamGroup::Decoder);
    norm(pfx + ".ln_mem", ParamGroup::Decoder);
    attn(pfx + ".cross", ParamGroup::Decoder);
    norm(pfx + ".ln3", ParamGroup::Decoder);
    mlp(pfx + ".mlp", ParamGroup::Decoder, d, hidden, d);
  }
  norm("dec.norm", ParamGroup::Decoder);
  linear("seg", ParamGroup::SegHead, d, cfg.pixels_per_token() * cfg.classes);
  mlp("pose.shared", ParamGroup::PoseHead, 2 * d, d, d);
  mlp("pose.t", ParamGroup::PoseHead, d, d, 3);
  mlp("pose.q", ParamGroup::PoseHead, d, d, 4);
  p.add("s_t", ParamGroup::PoseUncertainty, 1, 1, false);
  p.add("s_q", ParamGroup::PoseUncertainty, 1, 1, false);
  p.add("s_seg", ParamGroup::SegUncertainty, 1, 1, false);

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    Matrix& m = p.values[i];
    const std::string& name = p.info[i].name;
    if (p.info[i].decay) {
      std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(m.rows)));
      for (double& x : m.v) x = nd(rng);
    } else if (name == "pos") {
      std::normal_distribution<double> nd(0.0, 0.02);
      for (double& x : m.v) x = nd(rng);
    } else if (name.size() > 2 && name.compare(name.size() - 2, 2, ".g") == 0) {
      for (double& x : m.v) x = 1.0;
    }
  }
  p["pose.q.fc2.b"].v[0] = 1.0;
  return p;
}

std::size_t ModelParameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& m : values) n += m.size();
  return n;
}

int ModelParameters::index(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

bool ModelParameters::in_backbone(std::size_t i) const {
  const ParamGroup g = info[i].group;
  return g == ParamGroup::Encoder || g == ParamGroup::Decoder || g == ParamGroup::SegHead;
}

bool ModelParameters::all_finite() const {
  for (const auto& m : values)
    for (double x : m.v)
      if (!std::isfinite(x)) return false;
  return true;
}

Graph::Id Binder::operator()(const std::string& name) { return (*this)(p_.index(name)); }

Graph::Id Binder::operator()(int index) {
  auto& id = ids_[static_cast<std::size_t>(index)];
  if (id < 0) {
    const bool train = trainable_ == nullptr || (*trainable_)[static_cast<std::size_t>(index)];
    id = g_.parameter(p_.values[static_cast<std::size_t>(index)], index, train);
  }
  return id;
}

Matrix patchify(const Image& img, int patch) {
  if (patch <= 0 || img.size % patch != 0) throw ConfigError("image size not divisible by patch size");
  if (img.data.size() != static_cast<std::size_t>(3 * img.size * img.size)) throw ConfigError("image buffer size");
  const int grid = img.size / patch;
  Matrix t(grid * grid, 3 * patch * patch);
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx) {
      const int row = gy * grid + gx;
      int col = 0;
      for (int c = 0; c < 3; ++c)
        for (int dy = 0; dy < patch; ++dy)
          for (int dx = 0; dx < patch; ++dx) t(row, col++) = img.at(c, gx * patch + dx, gy * patch + dy);
    }
  return t;
}

Image unpatchify(const Matrix& tokens, int image_size, int patch) {
  if (patch <= 0 || image_size % patch != 0) throw ConfigError("image size not divisible by patch size");
  const int grid = image_size / patch;
  if (tokens.rows != grid * grid || tokens.cols != 3 * patch * patch) throw ConfigError("token matrix shape");
  Image img{image_size, std::vector<double>(static_cast<std::size_t>(3 * image_size * image_size))};
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx) {
      const int row = gy * grid + gx;
      int col = 0;
      for (int c = 0; c < 3; ++c)
        for (int dy = 0; dy < patch; ++dy)
          for (int dx = 0; dx < patch; ++dx) img.at(c, gx * patch + dx, gy * patch + dy) = tokens(row, col++);
    }
  return img;
}

namespace {

Graph::Id linear(Binder& b, const std::string& pfx, Graph::Id x) {
  Graph& g = b.graph();
  return g.add_row(g.matmul(x, b(pfx + ".w")), b(pfx + ".b"));
}

Graph::Id norm(Binder& b, const std::string& pfx, Graph::Id x) {
  return b.graph().layer_norm_rows(x, b(pfx + ".g"), b(pfx + ".b"));
}

Graph::Id mlp(Binder& b, const std::string& pfx, Graph::Id x) {
  return linear(b, pfx + ".fc2", b.graph().gelu(linear(b, pfx + ".fc1", x)));
}

Graph::Id attention(Binder& b, const std::string& pfx, Graph::Id xq, Graph::Id xkv) {
  Graph& g = b.graph();
  const ModelConfig& cfg = b.params().config();
  const int dh = cfg.dim / cfg.heads;
  const Graph::Id q = linear(b, pfx + ".q", xq);
  const Graph::Id k = linear(b, pfx + ".k", xkv);
  const Graph::Id v = linear(b, pfx + ".v", xkv);
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Graph::Id> heads;
  for (int h = 0; h < cfg.heads; ++h) {
    const Graph::Id qh = cfg.heads == 1 ? q : g.slice_cols(q, h * dh, dh);
    const Graph::Id kh = cfg.heads == 1 ? k : g.slice_cols(k, h * dh, dh);
    const Graph::Id vh = cfg.heads == 1 ? v : g.slice_cols(v, h * dh, dh);
    const Graph::Id a = g.softmax_rows(g.scale(g.matmul_bt(qh, kh), inv));
    heads.push_back(g.matmul(a, vh));
  }
  const Graph::Id cat = heads.size() == 1 ? heads[0] : g.concat_cols(heads);
  return linear(b, pfx + ".o", cat);
}

}  // namespace

Graph::Id encode(Binder& b, Graph::Id tokens) {
  Graph& g = b.graph();
  const ModelConfig& cfg = b.params().config();
  Graph::Id x = g.add(linear(b, "embed", tokens), b("pos"));
  for (int l = 0; l < cfg.enc_layers; ++l) {
    const std::string pfx = "enc." + std::to_string(l);
    const Graph::Id h = norm(b, pfx + ".ln1", x);
    x = g.add(x, attention(b, pfx + ".attn", h, h));
    x = g.add(x, mlp(b, pfx + ".mlp", norm(b, pfx + ".ln2", x)));
  }
  return norm(b, "enc.norm", x);
}

Graph::Id decode(Binder& b, Graph::Id f_self, Graph::Id f_other) {
  Graph& g = b.graph();
  const ModelConfig& cfg = b.params().config();
  Graph::Id x = f_self;
  for (int l = 0; l < cfg.dec_layers; ++l) {
    const std::string pfx = "dec." + std::to_string(l);
    const Graph::Id h = norm(b, pfx + ".ln1", x);
    x = g.add(x, attention(b, pfx + ".self", h, h));
    const Graph::Id mem = norm(b, pfx + ".ln_mem", f_other);
    x = g.add(x, attention(b, pfx + ".cross", norm(b, pfx + ".ln2", x), mem));
    x = g.add(x, mlp(b, pfx + ".mlp", norm(b, pfx + ".ln3", x)));
  }
  return norm(b, "dec.norm", x);
}

Graph::Id seg_logits(Binder& b, Graph::Id o) { return linear(b, "seg", o); }

PoseIds pose_head(Binder& b, Graph::Id o1, Graph::Id o2) {
  Graph& g = b.graph();
  const Graph::Id pooled[] = {g.mean_rows(o1), g.mean_rows(o2)};
  const Graph::Id shared = g.gelu(mlp(b, "pose.shared", g.concat_cols(pooled)));
  PoseIds out;
  out.t = mlp(b, "pose.t", shared);
  out.q = g.l2_normalize_rows(mlp(b, "pose.q", shared));
  return out;
}

ForwardIds forward(Binder& b, const Matrix& tokens1, const Matrix& tokens2) {
  Graph& g = b.graph();
  const ModelConfig& cfg = b.params().config();
  if (tokens1.rows != cfg.tokens() || tokens1.cols != cfg.token_len() || !tokens1.same_shape(tokens2))
    throw ConfigError("token matrix shape does not match the model config");
  ForwardIds f;
  f.f1 = encode(b, g.constant(tokens1));
  f.f2 = encode(b, g.constant(tokens2));
  f.o1 = decode(b, f.f1, f.f2);
  f.o2 = decode(b, f.f2, f.f1);
  f.logits1 = seg_logits(b, f.o1);
  f.logits2 = seg_logits(b, f.o2);
  f.pose = pose_head(b, f.o1, f.o2);
  return f;
}

std::vector<double> pixel_softmax(const Matrix& logits, int classes) {
  std::vector<double> out(logits.v);
  for (std::size_t k = 0; k + static_cast<std::size_t>(classes) <= out.size(); k += static_cast<std::size_t>(classes)) {
    double m = out[k];
    for (int c = 1; c < classes; ++c) m = std::max(m, out[k + static_cast<std::size_t>(c)]);
    double s = 0.0;
    for (int c = 0; c < classes; ++c) s += (out[k + static_cast<std::size_t>(c)] = std::exp(out[k + static_cast<std::size_t>(c)] - m));
    for (int c = 0; c < classes; ++c) out[k + static_cast<std::size_t>(c)] /= s;
  }
  return out;
}

Prediction predict(const ModelParameters& p, const Image& img1, const Image& img2) {
  const ModelConfig& cfg = p.config();
  Graph g;
  const std::vector<bool> frozen(p.size(), false);
  Binder b(g, p, &frozen);
  const ForwardIds f = forward(b, patchify(img1, cfg.patch), patchify(img2, cfg.patch));
  Prediction out;
  out.probs1 = pixel_softmax(g.value(f.logits1), cfg.classes);
  out.probs2 = pixel_softmax(g.value(f.logits2), cfg.classes);
  out.t = g.value(f.pose.t).v;
  out.q = g.value(f.pose.q).v;
  out.o1 = g.value(f.o1);
  out.o2 = g.value(f.o2);
  return out;
}

std::vector<int> token_labels(const std::vector<std::uint8_t>& labels, int image_size, int patch, int classes) {
  if (labels.size() != static_cast<std::size_t>(image_size) * image_size) throw ConfigError("label map size");
  if (patch <= 0 || image_size % patch != 0) throw ConfigError("image size not divisible by patch size");
  const int grid = image_size / patch;
  std::vector<int> out(labels.size());
  std::size_t k = 0;
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx)
      for (int dy = 0; dy < patch; ++dy)
        for (int dx = 0; dx < patch; ++dx) {
          const int l = labels[static_cast<std::size_t>(gy * patch + dy) * image_size + gx * patch + dx];
          out[k++] = l < classes ? l : -1;
        }
  return out;
}

}  // namespace covis::net
