#pragma once

// Siamese ViT encoder, cross-attending decoder, per-pixel segmentation head
// and relative pose head.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "covis/net/graph.hpp"

namespace covis::net {

struct ModelConfig {
  int image_size = 32;
  int patch = 8;
  int dim = 32;
  int enc_layers = 2;
  int dec_layers = 2;
  int heads = 2;
  int classes = 3;
  int mlp_ratio = 4;
  /// Flip the GT quaternion onto the hemisphere of the prediction before the
  /// MSE. Off by default.
  bool align_quat_sign = false;

  void validate() const;
  int grid() const { return image_size / patch; }
  int tokens() const { return grid() * grid(); }
  int token_len() const { return 3 * patch * patch; }
  int pixels_per_token() const { return patch * patch; }

  /// 224 px, p=16, 24 encoder / 12 decoder layers (documentation only).
  static ModelConfig full_scale();
};

enum class ParamGroup : std::uint8_t { Encoder, Decoder, SegHead, PoseHead, PoseUncertainty, SegUncertainty };

struct ParamInfo {
  std::string name;
  ParamGroup group;
  bool decay = false;  ///< weight decay applies (2-D weight matrices only)
};

class ModelParameters {
 public:
  ModelParameters() = default;
  /// Weights N(0, 1/fan_in), zero biases, unit layer-norm gains, positional
  /// encodings N(0, 0.02), q-head output bias (1,0,0,0).
  static ModelParameters init(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::size_t size() const { return values.size(); }
  std::size_t scalar_count() const;
  int index(const std::string& name) const;  ///< throws ConfigError if unknown
  Matrix& operator[](const std::string& name) { return values[static_cast<std::size_t>(index(name))]; }
  const Matrix& operator[](const std::string& name) const { return values[static_cast<std::size_t>(index(name))]; }

  bool in_backbone(std::size_t i) const;
  bool all_finite() const;

  std::vector<Matrix> values;
  std::vector<ParamInfo> info;

 private:
  void add(std::string name, ParamGroup group, int rows, int cols, bool decay);
  ModelConfig cfg_;
  std::unordered_map<std::string, int> by_name_;
};

/// Binds parameters into a graph on first use. `trainable` may be null
/// (everything trainable) or hold one flag per parameter.
class Binder {
 public:
  Binder(Graph& g, const ModelParameters& p, const std::vector<bool>* trainable = nullptr)
      : g_(g), p_(p), trainable_(trainable), ids_(p.size(), -1) {}
  Graph::Id operator()(const std::string& name);
  Graph::Id operator()(int index);
  Graph& graph() { return g_; }
  const ModelParameters& params() const { return p_; }

 private:
  Graph& g_;
  const ModelParameters& p_;
  const std::vector<bool>* trainable_;
  std::vector<Graph::Id> ids_;
};

/// Image stored channel-major, 3 x H x W, values roughly in [0, 1].
struct Image {
  int size = 0;
  std::vector<double> data;
  double& at(int c, int x, int y) { return data[(static_cast<std::size_t>(c) * size + y) * size + x]; }
  double at(int c, int x, int y) const { return data[(static_cast<std::size_t>(c) * size + y) * size + x]; }
};

/// Tokens in row-major patch order; each token is (channel, dy, dx) flattened.
Matrix patchify(const Image& img, int patch);
Image unpatchify(const Matrix& tokens, int image_size, int patch);

Graph::Id encode(Binder& b, Graph::Id tokens);
Graph::Id decode(Binder& b, Graph::Id f_self, Graph::Id f_other);
/// Logits, tokens x (p^2 * classes); pixel j = dy*p + dx of a token owns
/// columns [j*classes, (j+1)*classes).
Graph::Id seg_logits(Binder& b, Graph::Id o);

struct PoseIds {
  Graph::Id t = -1;
  Graph::Id q = -1;  ///< unit norm
};
PoseIds pose_head(Binder& b, Graph::Id o1, Graph::Id o2);

struct ForwardIds {
  Graph::Id f1 = -1, f2 = -1;
  Graph::Id o1 = -1, o2 = -1;
  Graph::Id logits1 = -1, logits2 = -1;
  PoseIds pose;
};

ForwardIds forward(Binder& b, const Matrix& tokens1, const Matrix& tokens2);

struct Prediction {
  std::vector<double> probs1;  ///< tokens x p^2 x classes
  std::vector<double> probs2;
  std::vector<double> t;  ///< 3
  std::vector<double> q;  ///< 4, unit
  Matrix o1, o2;          ///< decoder outputs
};

Prediction predict(const ModelParameters& p, const Image& img1, const Image& img2);

/// Per-pixel probabilities from logits (row softmax per pixel).
std::vector<double> pixel_softmax(const Matrix& logits, int classes);

/// Token-major labels for a square map: entry (token, dy*p+dx). Labels >=
/// classes (Ignore) become -1.
std::vector<int> token_labels(const std::vector<std::uint8_t>& labels, int image_size, int patch, int classes);

}  // namespace covis::net
