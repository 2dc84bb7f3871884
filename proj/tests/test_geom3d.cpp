#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "covis/errors.hpp"
#include "covis/geom3d.hpp"

using namespace covis;

namespace {

void expect_quat(const UnitQuaternion& q, double w, double x, double y, double z, double tol = 1e-12) {
  EXPECT_NEAR(q.w, w, tol);
  EXPECT_NEAR(q.x, x, tol);
  EXPECT_NEAR(q.y, y, tol);
  EXPECT_NEAR(q.z, z, tol);
}

RigidPose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  RigidPose p;
  p.rotation = quat_normalize({n(rng), n(rng), n(rng), n(rng)});
  p.translation = Vec3(n(rng), n(rng), n(rng));
  return p;
}

RigidPose translation(double x, double y, double z) {
  RigidPose p;
  p.translation = Vec3(x, y, z);
  return p;
}

CameraIntrinsics k128() { return {100.0, 100.0, 64.0, 64.0, 128, 128}; }

}  // namespace

TEST(QuatNormalize, Examples) {
  expect_quat(quat_normalize({2, 0, 0, 0}), 1, 0, 0, 0);
  expect_quat(quat_normalize({-1, 0, 0, 0}), 1, 0, 0, 0);
  expect_quat(quat_normalize({1, 1, 1, 1}), 0.5, 0.5, 0.5, 0.5);
}

TEST(QuatNormalize, CanonicalSignFlipsAllComponents) {
  expect_quat(quat_normalize({-1, 1, -1, 1}), 0.5, -0.5, 0.5, -0.5);
}

TEST(QuatNormalize, DegenerateThrows) {
  EXPECT_THROW(quat_normalize({0, 0, 0, 0}), DegenerateQuaternion);
  EXPECT_THROW(quat_normalize({1e-13, 0, 0, 0}), DegenerateQuaternion);
}

TEST(QuatGeodesic, Examples) {
  const UnitQuaternion id;
  const UnitQuaternion z90{std::sqrt(0.5), 0, 0, std::sqrt(0.5)};
  EXPECT_NEAR(quat_geodesic_deg(id, id), 0.0, 1e-12);
  EXPECT_NEAR(quat_geodesic_deg(id, z90), 90.0, 1e-9);
  const UnitQuaternion neg{-z90.w, -z90.x, -z90.y, -z90.z};
  EXPECT_NEAR(quat_geodesic_deg(z90, neg), 0.0, 1e-9);
}

TEST(QuatGeodesic, MatchesAxisAngle) {
  for (double a : {1.0, 30.0, 117.0, 179.0}) {
    const auto q = UnitQuaternion::from_axis_angle(Vec3(0.3, -1.0, 0.2), a);
    EXPECT_NEAR(quat_geodesic_deg(UnitQuaternion{}, q), a, 1e-9);
  }
}

TEST(QuatMultiply, MatchesMatrixProduct) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto a = random_pose(rng).rotation;
    const auto b = random_pose(rng).rotation;
    const Mat3 m = quat_multiply(a, b).matrix();
    EXPECT_LT((m - a.matrix() * b.matrix()).norm(), 1e-12);
  }
}

TEST(QuatFromMatrix, RoundTrip) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 50; ++i) {
    const auto q = random_pose(rng).rotation;
    const auto r = UnitQuaternion::from_matrix(q.matrix());
    EXPECT_NEAR(quat_geodesic_deg(q, r), 0.0, 1e-6);
    EXPECT_GE(r.w, 0.0);
  }
}

TEST(PoseCompose, Examples) {
  std::mt19937_64 rng(1);
  const RigidPose p = random_pose(rng);
  const RigidPose c = pose_compose(RigidPose::identity(), p);
  EXPECT_NEAR(quat_geodesic_deg(c.rotation, p.rotation), 0.0, 1e-9);
  EXPECT_LT((c.translation - p.translation).norm(), 1e-12);

  const RigidPose t = pose_compose(translation(1, 0, 0), translation(0, 2, 0));
  EXPECT_LT((t.translation - Vec3(1, 2, 0)).norm(), 1e-15);
}

TEST(PoseCompose, InverseLaw) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const RigidPose p = random_pose(rng);
    const RigidPose e = pose_compose(p, pose_invert(p));
    EXPECT_NEAR(quat_geodesic_deg(e.rotation, UnitQuaternion{}), 0.0, 1e-6);
    EXPECT_LT(e.translation.norm(), 1e-9);
  }
}

TEST(PoseCompose, AppliesRightThenLeft) {
  std::mt19937_64 rng(3);
  const RigidPose a = random_pose(rng);
  const RigidPose b = random_pose(rng);
  const Vec3 x(0.3, -2.0, 1.5);
  EXPECT_LT((pose_compose(a, b).apply(x) - a.apply(b.apply(x))).norm(), 1e-12);
}

TEST(PoseInvert, Examples) {
  const RigidPose id = pose_invert(RigidPose::identity());
  expect_quat(id.rotation, 1, 0, 0, 0);
  EXPECT_LT(id.translation.norm(), 1e-15);

  const RigidPose t = pose_invert(translation(1, -2, 3));
  EXPECT_LT((t.translation - Vec3(-1, 2, -3)).norm(), 1e-15);

  RigidPose p;
  p.rotation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), 90.0);
  p.translation = Vec3(1, 0, 0);
  const RigidPose inv = pose_invert(p);
  const auto expected = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), -90.0);
  EXPECT_NEAR(quat_geodesic_deg(inv.rotation, expected), 0.0, 1e-9);
  EXPECT_LT((inv.translation - Vec3(0, 1, 0)).norm(), 1e-12);
}

TEST(RelativePose, Examples) {
  std::mt19937_64 rng(4);
  const RigidPose p = random_pose(rng);
  const RigidPose same = relative_pose(p, p);
  EXPECT_NEAR(quat_geodesic_deg(same.rotation, UnitQuaternion{}), 0.0, 1e-6);
  EXPECT_LT(same.translation.norm(), 1e-12);

  const RigidPose r = relative_pose(RigidPose::identity(), translation(1, 0, 0));
  EXPECT_LT((r.translation - Vec3(-1, 0, 0)).norm(), 1e-15);
}

TEST(RelativePose, TransportsPoints) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int k = 0; k < 10; ++k) {
    const RigidPose f1 = random_pose(rng);
    const RigidPose f2 = random_pose(rng);
    const RigidPose rel = relative_pose(f1, f2);
    for (int i = 0; i < 100; ++i) {
      const Vec3 world(n(rng), n(rng), n(rng));
      const Vec3 cam1 = pose_invert(f1).apply(world);
      const Vec3 cam2 = pose_invert(f2).apply(world);
      EXPECT_LT((rel.apply(cam1) - cam2).norm(), 1e-9);
    }
  }
}

TEST(Project, Examples) {
  const auto K = k128();
  const auto a = project(K, Vec3(0, 0, 2));
  ASSERT_TRUE(a);
  EXPECT_DOUBLE_EQ(a->u, 64.0);
  EXPECT_DOUBLE_EQ(a->v, 64.0);
  EXPECT_DOUBLE_EQ(a->depth, 2.0);
  const auto b = project(K, Vec3(1, 0, 2));
  ASSERT_TRUE(b);
  EXPECT_DOUBLE_EQ(b->u, 114.0);
  EXPECT_DOUBLE_EQ(b->v, 64.0);
  EXPECT_FALSE(project(K, Vec3(0, 0, -1)));
  EXPECT_FALSE(project(K, Vec3(0, 0, 0)));
}

TEST(Unproject, Examples) {
  const auto K = k128();
  EXPECT_LT((unproject(K, 64, 64, 2) - Vec3(0, 0, 2)).norm(), 1e-15);
  EXPECT_LT((unproject(K, 114, 64, 2) - Vec3(1, 0, 2)).norm(), 1e-15);
  EXPECT_THROW(unproject(K, 1, 1, 0.0), InvalidDepth);
  EXPECT_THROW(unproject(K, 1, 1, -1.0), InvalidDepth);
}

TEST(Unproject, RoundTrip) {
  const CameraIntrinsics K{120.0, 110.0, 50.5, 40.25, 101, 81};
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 101.0), v(0.0, 81.0), d(0.1, 50.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double uu = u(rng), vv = v(rng), dd = d(rng);
    const auto p = project(K, unproject(K, uu, vv, dd));
    ASSERT_TRUE(p);
    worst = std::max({worst, std::abs(p->u - uu), std::abs(p->v - vv), std::abs(p->depth - dd)});
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Intrinsics, Validate) {
  EXPECT_NO_THROW(k128().validate());
  EXPECT_THROW((CameraIntrinsics{0, 1, 0, 0, 4, 4}).validate(), ConfigError);
  EXPECT_THROW((CameraIntrinsics{1, 1, 0, 0, 0, 4}).validate(), ConfigError);
  EXPECT_THROW((CameraIntrinsics{1, 1, 9, 0, 4, 4}).validate(), ConfigError);
}

TEST(DepthMap, Validity) {
  DepthMap d(3, 2, 1.0);
  d.at(0, 0) = 0.0;
  d.at(1, 0) = -2.0;
  d.at(2, 0) = std::nan("");
  d.at(0, 1) = INFINITY;
  EXPECT_FALSE(d.valid(0, 0));
  EXPECT_FALSE(d.valid(1, 0));
  EXPECT_FALSE(d.valid(2, 0));
  EXPECT_FALSE(d.valid(0, 1));
  EXPECT_TRUE(d.valid(1, 1));
}

TEST(CameraFrame, ValidateSize) {
  CameraFrame f{k128(), {}, DepthMap(128, 128, 1.0)};
  EXPECT_NO_THROW(f.validate());
  f.depth = DepthMap(64, 128, 1.0);
  EXPECT_THROW(f.validate(), ConfigError);
}

TEST(AngleBetween, ParallelIsExactlyZero) {
  EXPECT_EQ(angle_between_deg(Vec3(1, 2, 3), Vec3(2, 4, 6)), 0.0);
  EXPECT_NEAR(angle_between_deg(Vec3(1, 0, 0), Vec3(0, 1, 0)), 90.0, 1e-12);
  EXPECT_NEAR(angle_between_deg(Vec3(1, 0, 0), Vec3(-1, 0, 0)), 180.0, 1e-12);
}
