#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "covis/errors.hpp"
#include "covis/formats.hpp"
#include "support/tempdir.hpp"

using namespace covis;
using covis::testing::TempDir;

namespace {

CovisMap random_map(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(1, 80), lab(0, 3), runlen(1, 40);
  CovisMap m(dim(rng), dim(rng));
  m.scheme = static_cast<ClassScheme>(std::uniform_int_distribution<int>(0, 2)(rng));
  auto labels = m.labels();
  std::size_t i = 0;
  while (i < labels.size()) {
    const int l = lab(rng);
    const CovisLabel v = l == 3 ? CovisLabel::Ignore : static_cast<CovisLabel>(l);
    for (int k = runlen(rng); k > 0 && i < labels.size(); --k) labels[i++] = v;
  }
  return m;
}

}  // namespace

TEST(Cub3, RoundTripRandomMaps) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const CovisMap m = random_map(rng);
    const auto bytes = encode_covis(m);
    EXPECT_TRUE(decode_covis(bytes).same_labels(m)) << i;
    EXPECT_EQ(encode_covis(decode_covis(bytes)), bytes);
  }
}

TEST(Cub3, UniformMapIsHeaderPlusOneRun) {
  const CovisMap m(64, 64, CovisLabel::Covisible);
  const auto bytes = encode_covis(m);
  const std::vector<std::uint8_t> expected{'C', 'U', 'B', '3', 1, 64, 0, 64, 0, 0, 0, 0x00, 0x10, 0, 0};
  EXPECT_EQ(bytes, expected);
}

TEST(Cub3, Errors) {
  const auto good = encode_covis(CovisMap(3, 2, CovisLabel::Occluded));
  auto bad = good;
  bad[0] = 'X';
  EXPECT_THROW(decode_covis(bad), FormatError);

  bad = good;
  bad[4] = 2;
  EXPECT_THROW(decode_covis(bad), FormatError);

  bad = good;
  bad[9] = 7;
  EXPECT_THROW(decode_covis(bad), FormatError);

  bad = good;
  bad.pop_back();
  EXPECT_THROW(decode_covis(bad), FormatError);

  bad = good;
  bad.push_back(0);
  EXPECT_THROW(decode_covis(bad), FormatError);

  bad = good;
  bad[10] = 9;  // label value outside {0,1,2,255}
  EXPECT_THROW(decode_covis(bad), FormatError);

  bad = good;
  bad[11] = 7;  // run longer than the image
  EXPECT_THROW(decode_covis(bad), FormatError);

  EXPECT_THROW(decode_covis(std::vector<std::uint8_t>{'C', 'U'}), FormatError);
}

TEST(Cub3, FileRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(3);
  const CovisMap m = random_map(rng);
  write_covis(dir / "m.cub3", m);
  EXPECT_TRUE(read_covis(dir / "m.cub3").same_labels(m));
}

TEST(Pfm, RoundTripWithInvalid) {
  TempDir dir;
  DepthMap d(5, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) d.at(x, y) = 0.5 + x + 10 * y;
  d.at(1, 1) = std::nan("");
  d.at(2, 2) = -3.0;
  write_pfm(dir / "d.pfm", d);
  const DepthMap r = read_pfm(dir / "d.pfm");
  ASSERT_EQ(r.width(), 5);
  ASSERT_EQ(r.height(), 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) {
      if (!d.valid(x, y)) {
        EXPECT_EQ(r.at(x, y), 0.0);
      } else {
        EXPECT_EQ(r.at(x, y), static_cast<double>(static_cast<float>(d.at(x, y))));
      }
    }
}

TEST(Pfm, RowsStoredBottomUp) {
  TempDir dir;
  DepthMap d(1, 2);
  d.at(0, 0) = 1.0;
  d.at(0, 1) = 2.0;
  write_pfm(dir / "d.pfm", d);
  const auto bytes = read_file_bytes(dir / "d.pfm");
  float first;
  std::memcpy(&first, bytes.data() + bytes.size() - 8, 4);
  EXPECT_EQ(first, 2.0f);
}

TEST(Pfm, Truncated) {
  TempDir dir;
  write_pfm(dir / "d.pfm", DepthMap(4, 4, 1.0));
  auto bytes = read_file_bytes(dir / "d.pfm");
  bytes.resize(bytes.size() - 3);
  write_file_bytes(dir / "d.pfm", bytes);
  EXPECT_THROW(read_pfm(dir / "d.pfm"), FormatError);
}

TEST(Ppm, RoundTrip) {
  TempDir dir;
  RgbImage img{3, 2, {}};
  for (int i = 0; i < 18; ++i) img.rgb.push_back(static_cast<std::uint8_t>(i * 13));
  write_ppm(dir / "a.ppm", img);
  const RgbImage r = read_ppm(dir / "a.ppm");
  EXPECT_EQ(r.width, 3);
  EXPECT_EQ(r.height, 2);
  EXPECT_EQ(r.rgb, img.rgb);
  EXPECT_EQ(r.pixel(2, 1), (std::array<std::uint8_t, 3>{195, 208, 221}));
}

TEST(Overlay, ColorContract) {
  EXPECT_EQ(label_color(CovisLabel::Covisible), (std::array<std::uint8_t, 3>{46, 204, 64}));
  EXPECT_EQ(label_color(CovisLabel::Occluded), (std::array<std::uint8_t, 3>{255, 133, 27}));
  EXPECT_EQ(label_color(CovisLabel::OutsideFov), (std::array<std::uint8_t, 3>{128, 128, 128}));
  EXPECT_EQ(label_color(CovisLabel::Ignore), (std::array<std::uint8_t, 3>{0, 0, 0}));
  EXPECT_EQ(label_color(CovisLabel::Occluded, ClassScheme::CovisibleOrNot), label_color(CovisLabel::OutsideFov));

  const RgbImage all = render_overlay(CovisMap(4, 3, CovisLabel::Covisible));
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(all.pixel(x, y), label_color(CovisLabel::Covisible));
}

TEST(Overlay, BlendsHalfOverSource) {
  const CovisMap m(1, 1, CovisLabel::OutsideFov);
  const RgbImage src{1, 1, {0, 255, 100}};
  EXPECT_EQ(render_overlay(m, src).pixel(0, 0), (std::array<std::uint8_t, 3>{64, 192, 114}));
  EXPECT_THROW(render_overlay(m, RgbImage{2, 1, std::vector<std::uint8_t>(6)}), ConfigError);
}
