#include "covis/net/checkpoint.hpp"

#include <bit>
#include <string>

#include "covis/errors.hpp"
#include "covis/formats.hpp"

namespace covis::net {

namespace {

constexpr char kMagic[4] = {'A', '0', 'R', 'C'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw FormatError("checkpoint: truncated");
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelParameters& params) {
  const ModelConfig& c = params.config();
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  for (int v : {c.image_size, c.patch, c.dim, c.enc_layers, c.dec_layers, c.heads, c.classes, c.mlp_ratio}) w.i32(v);
  w.u8(c.align_quat_sign ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.info[i].name;
    const Matrix& m = params.values[i];
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(2);
    w.u32(static_cast<std::uint32_t>(m.rows));
    w.u32(static_cast<std::uint32_t>(m.cols));
    for (double x : m.v) w.f32(static_cast<float>(x));
  }
  return std::move(w.out);
}

ModelParameters decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw FormatError("checkpoint: bad magic");
  if (r.u32() != kVersion) throw FormatError("checkpoint: unsupported version");
  ModelConfig c;
  for (int* f : {&c.image_size, &c.patch, &c.dim, &c.enc_layers, &c.dec_layers, &c.heads, &c.classes, &c.mlp_ratio})
    *f = r.i32();
  const std::uint8_t align = r.u8();
  if (align > 1) throw FormatError("checkpoint: bad flag byte");
  c.align_quat_sign = align == 1;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  ModelParameters p = ModelParameters::init(c, 0);
  const std::uint32_t blocks = r.u32();
  if (blocks != p.size()) throw FormatError("checkpoint: block count does not match the config");
  for (std::uint32_t b = 0; b < blocks; ++b) {
    const std::string name = r.str(r.u32());
    if (name != p.info[b].name) throw FormatError("checkpoint: unexpected block " + name);
    Matrix& m = p.values[b];
    const std::uint32_t rank = r.u32();
    if (rank != 2) throw FormatError("checkpoint: unsupported rank for " + name);
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows != static_cast<std::uint32_t>(m.rows) || cols != static_cast<std::uint32_t>(m.cols))
      throw FormatError("checkpoint: shape mismatch for " + name);
    for (double& x : m.v) x = r.f32();
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  if (!p.all_finite()) throw FormatError("checkpoint: non-finite parameter");
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params) {
  write_file_bytes(path, encode_checkpoint(params));
}

ModelParameters load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace covis::net
