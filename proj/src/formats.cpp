#include "covis/formats.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "covis/errors.hpp"

namespace covis {

namespace {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

constexpr std::array<char, 4> kCub3Magic{'C', 'U', 'B', '3'};
constexpr std::size_t kCub3HeaderSize = 4 + 1 + 2 + 2 + 1;
constexpr std::size_t kCub3RunSize = 1 + 4;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

// Reads one whitespace-delimited PNM/PFM header token, skipping comments.
std::string header_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] != '#') return tok;
    std::string rest;
    std::getline(in, rest);
  }
  throw FormatError("unexpected end of header");
}

}  // namespace

std::vector<std::uint8_t> encode_covis(const CovisMap& map) {
  if (map.width() > 0xFFFF || map.height() > 0xFFFF) throw FormatError("CUB3: image too large");
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kCub3Magic.begin(), kCub3Magic.end());
  put<std::uint8_t>(out, kCub3Version);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(map.width()));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(map.height()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(map.scheme));

  const auto labels = map.labels();
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i + 1;
    while (j < labels.size() && labels[j] == labels[i] && j - i < 0xFFFFFFFFu) ++j;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(labels[i]));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(j - i));
    i = j;
  }
  return out;
}

CovisMap decode_covis(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCub3HeaderSize) throw FormatError("CUB3: truncated header");
  if (std::memcmp(bytes.data(), kCub3Magic.data(), 4) != 0) throw FormatError("CUB3: bad magic");
  const auto version = get<std::uint8_t>(bytes, 4);
  if (version != kCub3Version) throw FormatError("CUB3: unsupported version " + std::to_string(version));
  const int width = get<std::uint16_t>(bytes, 5);
  const int height = get<std::uint16_t>(bytes, 7);
  const auto scheme = get<std::uint8_t>(bytes, 9);
  if (scheme > 2) throw FormatError("CUB3: unknown class scheme " + std::to_string(scheme));

  CovisMap map(width, height);
  map.scheme = static_cast<ClassScheme>(scheme);
  auto labels = map.labels();
  const std::size_t total = labels.size();
  std::size_t filled = 0;
  std::size_t offset = kCub3HeaderSize;
  while (filled < total) {
    if (offset + kCub3RunSize > bytes.size()) throw FormatError("CUB3: truncated run data");
    const auto label = get<std::uint8_t>(bytes, offset);
    const auto run = get<std::uint32_t>(bytes, offset + 1);
    offset += kCub3RunSize;
    if (!is_valid_label_value(label)) throw FormatError("CUB3: invalid label " + std::to_string(label));
    if (run == 0 || run > total - filled) throw FormatError("CUB3: run length does not fit the image");
    std::fill_n(labels.begin() + static_cast<std::ptrdiff_t>(filled), run, static_cast<CovisLabel>(label));
    filled += run;
  }
  if (offset != bytes.size()) throw FormatError("CUB3: trailing bytes after run data");
  return map;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

void write_covis(const std::filesystem::path& path, const CovisMap& map) {
  write_file_bytes(path, encode_covis(map));
}

CovisMap read_covis(const std::filesystem::path& path) { return decode_covis(read_file_bytes(path)); }

void write_pfm(const std::filesystem::path& path, const DepthMap& depth) {
  std::vector<std::uint8_t> out;
  const std::string header =
      "Pf\n" + std::to_string(depth.width()) + " " + std::to_string(depth.height()) + "\n-1.0\n";
  out.insert(out.end(), header.begin(), header.end());
  for (int y = depth.height() - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double d = depth.at(x, y);
      put<float>(out, DepthMap::is_valid_depth(d) ? static_cast<float>(d) : 0.0f);
    }
  }
  write_file_bytes(path, out);
}

DepthMap read_pfm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::istringstream head(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(
                                                                           std::min<std::size_t>(bytes.size(), 256))));
  if (header_token(head) != "Pf") throw FormatError(path.string() + ": not a single-channel PFM");
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(header_token(head));
    height = std::stoi(header_token(head));
    scale = std::stod(header_token(head));
  } catch (const std::logic_error&) {
    throw FormatError(path.string() + ": malformed PFM header");
  }
  if (width <= 0 || height <= 0) throw FormatError(path.string() + ": bad PFM size");
  if (scale >= 0.0) throw FormatError(path.string() + ": big-endian PFM is not supported");
  head.get();  // single whitespace after the scale
  const auto offset = static_cast<std::size_t>(head.tellg());
  const std::size_t need = static_cast<std::size_t>(width) * height * sizeof(float);
  if (bytes.size() < offset + need) throw FormatError(path.string() + ": truncated PFM payload");

  DepthMap depth(width, height);
  std::size_t pos = offset;
  for (int y = height - 1; y >= 0; --y) {
    for (int x = 0; x < width; ++x, pos += sizeof(float)) {
      const float v = get<float>(bytes, pos);
      depth.at(x, y) = std::isfinite(v) && v > 0.0f ? static_cast<double>(v) : 0.0;
    }
  }
  return depth;
}

void write_label_pgm(const std::filesystem::path& path, const CovisMap& map) {
  std::vector<std::uint8_t> out;
  const std::string header = "P5\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n255\n";
  out.insert(out.end(), header.begin(), header.end());
  for (CovisLabel l : map.labels()) out.push_back(static_cast<std::uint8_t>(l));
  write_file_bytes(path, out);
}

std::array<std::uint8_t, 3> RgbImage::pixel(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::vector<std::uint8_t> out;
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  write_file_bytes(path, out);
}

RgbImage read_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::istringstream head(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(
                                                                           std::min<std::size_t>(bytes.size(), 256))));
  if (header_token(head) != "P6") throw FormatError(path.string() + ": not a binary PPM");
  RgbImage img;
  int maxval = 0;
  try {
    img.width = std::stoi(header_token(head));
    img.height = std::stoi(header_token(head));
    maxval = std::stoi(header_token(head));
  } catch (const std::logic_error&) {
    throw FormatError(path.string() + ": malformed PPM header");
  }
  if (img.width <= 0 || img.height <= 0 || maxval != 255) throw FormatError(path.string() + ": unsupported PPM");
  head.get();
  const auto offset = static_cast<std::size_t>(head.tellg());
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * 3;
  if (bytes.size() < offset + need) throw FormatError(path.string() + ": truncated PPM payload");
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                 bytes.begin() + static_cast<std::ptrdiff_t>(offset + need));
  return img;
}

std::array<std::uint8_t, 3> label_color(CovisLabel label, ClassScheme scheme) {
  constexpr std::array<std::uint8_t, 3> kGreen{46, 204, 64};
  constexpr std::array<std::uint8_t, 3> kOrange{255, 133, 27};
  constexpr std::array<std::uint8_t, 3> kGray{128, 128, 128};
  constexpr std::array<std::uint8_t, 3> kBlack{0, 0, 0};
  switch (label) {
    case CovisLabel::Covisible: return kGreen;
    case CovisLabel::Occluded: return scheme == ClassScheme::ThreeClass ? kOrange : kGray;
    case CovisLabel::OutsideFov: return kGray;
    case CovisLabel::Ignore: return kBlack;
  }
  return kBlack;
}

RgbImage render_overlay(const CovisMap& map, const std::optional<RgbImage>& source) {
  if (source && (source->width != map.width() || source->height != map.height()))
    throw ConfigError("overlay: source image size does not match the map");
  RgbImage out{map.width(), map.height(), std::vector<std::uint8_t>(map.size() * 3)};
  const auto labels = map.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto color = label_color(labels[i], map.scheme);
    for (std::size_t c = 0; c < 3; ++c) {
      if (source) {
        const int blended = (color[c] + source->rgb[i * 3 + c] + 1) / 2;
        out.rgb[i * 3 + c] = static_cast<std::uint8_t>(blended);
      } else {
        out.rgb[i * 3 + c] = color[c];
      }
    }
  }
  return out;
}

}  // namespace covis
