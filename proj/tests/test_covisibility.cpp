#include <gtest/gtest.h>
#include <omp.h>

#include "covis/covisibility.hpp"
#include "covis/errors.hpp"
#include "covis/synthscene.hpp"
#include "support/scenes.hpp"

using namespace covis;
using namespace covis::testing;

namespace {

CovisMap map_from(std::initializer_list<CovisLabel> labels) {
  CovisMap m(static_cast<int>(labels.size()), 1);
  std::copy(labels.begin(), labels.end(), m.labels().begin());
  return m;
}

std::vector<std::uint8_t> raw(const CovisMap& m) {
  std::vector<std::uint8_t> out;
  for (CovisLabel l : m.labels()) out.push_back(static_cast<std::uint8_t>(l));
  return out;
}

}  // namespace

TEST(CovisMap, Counts) {
  const CovisMap m = map_from({CovisLabel::Covisible, CovisLabel::Ignore, CovisLabel::Occluded, CovisLabel::Covisible});
  EXPECT_EQ(m.count(CovisLabel::Covisible), 2u);
  EXPECT_EQ(m.labelled_count(), 3u);
  EXPECT_THROW(CovisMap(-1, 2), ConfigError);
}

TEST(LabelValues, Valid) {
  for (int v = 0; v < 256; ++v)
    EXPECT_EQ(is_valid_label_value(static_cast<std::uint8_t>(v)), v <= 2 || v == 255) << v;
  EXPECT_EQ(class_count(ClassScheme::ThreeClass), 3);
  EXPECT_EQ(class_count(ClassScheme::CovisibleOrNot), 2);
  EXPECT_EQ(class_count(ClassScheme::InsideFovOrNot), 2);
}

TEST(SampleDepthBilinear, InterpolatesAtPixelCenters) {
  DepthMap d(2, 2);
  d.at(0, 0) = 1.0;
  d.at(1, 0) = 3.0;
  d.at(0, 1) = 5.0;
  d.at(1, 1) = 7.0;
  EXPECT_DOUBLE_EQ(sample_depth_bilinear(d, 0.5, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(sample_depth_bilinear(d, 1.5, 1.5), 7.0);
  EXPECT_DOUBLE_EQ(sample_depth_bilinear(d, 1.0, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(sample_depth_bilinear(d, 1.0, 1.0), 4.0);
}

TEST(SampleDepthBilinear, SkipsInvalidNeighbors) {
  DepthMap d(2, 1);
  d.at(0, 0) = 2.0;
  d.at(1, 0) = 0.0;
  EXPECT_DOUBLE_EQ(sample_depth_bilinear(d, 1.0, 0.5), 2.0);
  DepthMap empty(2, 2, 0.0);
  EXPECT_LE(sample_depth_bilinear(empty, 1.0, 1.0), 0.0);
}

TEST(Annotate, IdenticalFramesAllCovisible) {
  const auto scene = synth::sample_scene(11);
  const CameraFrame f = synth::make_frame(scene, 0);
  const CovisMap m = annotate_pair(f, f);
  EXPECT_EQ(m.count(CovisLabel::Covisible) + m.count(CovisLabel::Ignore), m.size());
  EXPECT_EQ(m.count(CovisLabel::Covisible), m.labelled_count());
  EXPECT_GT(m.labelled_count(), 0u);
}

TEST(Annotate, InvalidSourceDepthAllIgnore) {
  const auto scene = plane_scene(3.0);
  CameraFrame src = synth::make_frame(scene, 0);
  const CameraFrame tgt = synth::make_frame(scene, 1);
  for (double& d : src.depth.values()) d = 0.0;
  const CovisMap m = annotate_pair(src, tgt);
  EXPECT_EQ(m.count(CovisLabel::Ignore), m.size());
}

TEST(Annotate, Opposed180AllOutsideFov) {
  const auto scene = plane_scene(3.0, 180.0);
  const CovisMap m = annotate_pair(synth::make_frame(scene, 0), synth::make_frame(scene, 1));
  EXPECT_EQ(m.count(CovisLabel::OutsideFov), m.size());
}

TEST(Annotate, OccluderMatchesClosedForm) {
  const OccluderScene s;
  const auto spec = s.spec();
  const CovisMap m = annotate_pair(synth::make_frame(spec, 0), synth::make_frame(spec, 1));
  EXPECT_DOUBLE_EQ(closed_form_agreement(s, m), 1.0);
  const FootprintBand band = occluded_footprint(s);
  EXPECT_GT(band.inner, 0u);
  EXPECT_GE(m.count(CovisLabel::Occluded), band.inner);
  EXPECT_LE(m.count(CovisLabel::Occluded), band.outer);
}

TEST(Annotate, OccluderMatchesOracle) {
  const OccluderScene s;
  const auto a = oracle_agreement(s.spec(), 0);
  EXPECT_EQ(a.agree, a.compared);
}

TEST(Annotate, InvalidTargetPolicy) {
  const auto scene = plane_scene(3.0);
  const CameraFrame src = synth::make_frame(scene, 0);
  CameraFrame tgt = synth::make_frame(scene, 1);
  for (double& d : tgt.depth.values()) d = 0.0;
  AnnotateOptions o;
  for (auto [policy, label] : {std::pair{InvalidTargetPolicy::Occluded, CovisLabel::Occluded},
                               std::pair{InvalidTargetPolicy::Covisible, CovisLabel::Covisible},
                               std::pair{InvalidTargetPolicy::Ignore, CovisLabel::Ignore}}) {
    o.invalid_target_policy = policy;
    const CovisMap m = annotate_pair(src, tgt, o);
    EXPECT_EQ(m.count(label), m.size());
  }
}

TEST(Annotate, ToleranceBoundary) {
  // Target sees a plane 1 m closer than the source point; the pixel flips
  // from Occluded to Covisible once the absolute slack reaches 1 m.
  const auto scene = plane_scene(4.0);
  const CameraFrame src = synth::make_frame(scene, 0);
  CameraFrame tgt = synth::make_frame(scene, 1);
  for (double& d : tgt.depth.values()) d = 3.0;
  AnnotateOptions o;
  o.tolerance = {0.0, 0.999};
  EXPECT_EQ(classify_pixel(src, tgt, 48, 36, o), CovisLabel::Occluded);
  o.tolerance = {0.0, 1.0};
  EXPECT_EQ(classify_pixel(src, tgt, 48, 36, o), CovisLabel::Covisible);
  o.tolerance = {1.0 / 3.0 + 1e-12, 0.0};
  EXPECT_EQ(classify_pixel(src, tgt, 48, 36, o), CovisLabel::Covisible);
}

TEST(Annotate, NegativeToleranceRejected) {
  const auto scene = plane_scene(3.0);
  const CameraFrame f = synth::make_frame(scene, 0);
  AnnotateOptions o;
  o.tolerance.relative = -0.1;
  EXPECT_THROW(annotate_pair(f, f, o), ConfigError);
}

TEST(Annotate, MismatchedDepthRejected) {
  const auto scene = plane_scene(3.0);
  CameraFrame f = synth::make_frame(scene, 0);
  const CameraFrame g = f;
  f.depth = DepthMap(10, 10, 1.0);
  EXPECT_THROW(annotate_pair(f, g), ConfigError);
}

TEST(Annotate, ParallelMatchesReferenceAtAnyThreadCount) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const auto scene = synth::sample_scene(seed);
    const CameraFrame a = synth::make_frame(scene, 0);
    const CameraFrame b = synth::make_frame(scene, 1);
    const CovisMap ref = annotate_pair_reference(a, b);
    for (int threads : {1, 2, 3, 8}) {
      omp_set_num_threads(threads);
      EXPECT_TRUE(annotate_pair(a, b).same_labels(ref)) << "seed " << seed << " threads " << threads;
    }
  }
  omp_set_num_threads(omp_get_num_procs());
}

TEST(Annotate, OracleAgreementOnRandomScenes) {
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    const auto scene = synth::sample_scene(seed);
    for (int dir = 0; dir < 2; ++dir) {
      const auto a = oracle_agreement(scene, dir);
      EXPECT_GE(a.rate(), 0.99) << "seed " << seed << " direction " << dir;
    }
  }
}

TEST(RemapClasses, Examples) {
  const CovisMap m = map_from({CovisLabel::Covisible, CovisLabel::Occluded, CovisLabel::OutsideFov, CovisLabel::Ignore});
  EXPECT_TRUE(remap_classes(m, ClassScheme::ThreeClass).same_labels(m));

  const CovisMap c = remap_classes(m, ClassScheme::CovisibleOrNot);
  EXPECT_EQ(c.scheme, ClassScheme::CovisibleOrNot);
  EXPECT_EQ(raw(c), (std::vector<std::uint8_t>{0, 1, 1, 255}));

  const CovisMap f = remap_classes(m, ClassScheme::InsideFovOrNot);
  EXPECT_EQ(raw(f), (std::vector<std::uint8_t>{0, 0, 1, 255}));

  EXPECT_THROW(remap_classes(c, ClassScheme::InsideFovOrNot), UsageError);
}
