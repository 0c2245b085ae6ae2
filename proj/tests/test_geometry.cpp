#include <gtest/gtest.h>

#include <cmath>

#include "geometry.hpp"
#include "support.hpp"

using namespace offtrack;
using offtrack::testing::box;

TEST(NormalizeYaw, LandsInHalfOpenInterval) {
  CounterRng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const double a = rng.uniform(-50.0, 50.0);
    const double n = normalize_yaw(a);
    EXPECT_GT(n, -kPi);
    EXPECT_LE(n, kPi);
    EXPECT_NEAR(std::remainder(a - n, 2 * kPi), 0.0, 1e-9);
  }
  EXPECT_DOUBLE_EQ(normalize_yaw(-kPi), kPi);
  EXPECT_DOUBLE_EQ(normalize_yaw(kPi), kPi);
}

TEST(BevIou, IdenticalAndDisjoint) {
  const Box7 a = box(1, 2, 0, 4, 2, 1.5, 0.3);
  EXPECT_NEAR(bev_iou(a, a), 1.0, 1e-12);
  EXPECT_EQ(bev_iou(box(0, 0, 0, 1, 1, 1), box(100, 0, 0, 1, 1, 1)), 0.0);
}

TEST(BevIou, RotatedUnitSquareMatchesSampling) {
  const Box7 a = box(0, 0, 0, 1, 1, 1);
  const Box7 b = box(0, 0, 0, 1, 1, 1, kPi / 4);
  // Octagon area 2(sqrt2 - 1); union 2 - that.
  const double inter = 2.0 * (std::sqrt(2.0) - 1.0);
  EXPECT_NEAR(bev_iou(a, b), inter / (2.0 - inter), 1e-12);

  // Plain Monte-Carlo over the union's bounding square, 10^6 samples.
  CounterRng rng(5);
  const double half = std::sqrt(2.0) / 2;
  int in_a = 0, in_b = 0, in_both = 0;
  for (int i = 0; i < 1000000; ++i) {
    const Eigen::Vector3d p{rng.uniform(-half, half), rng.uniform(-half, half), 0.0};
    const bool ia = offtrack::testing::inside_oracle(a, p);
    const bool ib = offtrack::testing::inside_oracle(b, p);
    in_a += ia;
    in_b += ib;
    in_both += ia && ib;
  }
  EXPECT_NEAR(bev_iou(a, b), static_cast<double>(in_both) / (in_a + in_b - in_both), 2e-3);
  EXPECT_NEAR(bev_iou(a, b), 0.7071, 2e-3);
}

TEST(Iou3d, AnalyticAxisAligned) {
  const Box7 a = box(0, 0, 0, 1, 1, 1);
  EXPECT_DOUBLE_EQ(iou3d(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou3d(a, box(0.5, 0, 0, 1, 1, 1)), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(iou3d(a, box(0, 0, 0.5, 1, 1, 1)), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(iou3d(a, box(0.5, 0.5, 0.5, 1, 1, 1)), 0.125 / 1.875);
  EXPECT_EQ(iou3d(a, box(0, 0, 1.0, 1, 1, 1)), 0.0);  // touching faces
  EXPECT_DOUBLE_EQ(iou3d(box(0, 0, 0, 2, 2, 2), a), 1.0 / 8.0);  // nested
}

TEST(Iou3d, QuarterTurnEqualsSwappedExtent) {
  CounterRng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Box7 a = offtrack::testing::random_box(rng);
    Box7 b = offtrack::testing::random_box(rng);
    Box7 b2 = b;
    std::swap(b2.l, b2.w);
    b2.yaw = normalize_yaw(b.yaw + kPi / 2);
    EXPECT_NEAR(iou3d(a, b), iou3d(a, b2), 1e-9);
    Box7 b3 = b;
    b3.yaw = normalize_yaw(b.yaw + kPi);
    EXPECT_NEAR(iou3d(a, b), iou3d(a, b3), 1e-9);
  }
}

TEST(Iou3d, SymmetricAndBounded) {
  CounterRng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Box7 a = offtrack::testing::random_box(rng, 2.0);
    const Box7 b = offtrack::testing::random_box(rng, 2.0);
    const double ab = iou3d(a, b);
    EXPECT_EQ(ab, iou3d(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_LE(ab, bev_iou(a, b) + 1e-12);
  }
}

TEST(Iou3d, MatchesStratifiedSampling) {
  CounterRng rng(21);
  for (int i = 0; i < 15; ++i) {
    const Box7 a = offtrack::testing::random_box(rng, 1.0);
    const Box7 b = offtrack::testing::random_box(rng, 1.0);
    EXPECT_NEAR(iou3d(a, b), offtrack::testing::iou3d_sampled(a, b, 60, rng), 2e-3) << i;
  }
}

TEST(Containment, CenterAndBoundary) {
  const Box7 b = box(5, -3, 1, 4, 2, 1.5, 0.7);
  const Eigen::Vector3d m{0.5, 0.4, 0.2};
  EXPECT_TRUE(contains_point(b, {0, 0, 0}, b.center()));
  const Eigen::Vector3d heading{std::cos(b.yaw), std::sin(b.yaw), 0};
  const double reach = b.l / 2 + m.x() / 2;
  EXPECT_TRUE(contains_point(b, m, b.center() + heading * (reach - 1e-6)));
  EXPECT_FALSE(contains_point(b, m, b.center() + heading * (reach + 1e-6)));
}

TEST(Containment, CropMatchesPerPointOracle) {
  CounterRng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Box7 b = offtrack::testing::random_box(rng, 1.0);
    const PointCloud cloud = offtrack::testing::random_cloud(rng, 3000, 4.0);
    const Eigen::Vector3d m{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)};
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (offtrack::testing::inside_oracle(b, cloud.positions()[i], m)) expect.push_back(i);
    }
    EXPECT_EQ(crop_indices(b, m, cloud), expect);
    EXPECT_EQ(count_points_in(b, m, cloud), expect.size());
    EXPECT_EQ(crop_points(b, m, cloud).size(), expect.size());
  }
}

TEST(Poses, CanonicalFrame) {
  const Box7 b = box(3, 4, 1, 4, 2, 1.5, 2.5);
  const Box7 c = apply_pose(to_canonical(b), b);
  EXPECT_NEAR(c.cx, 0, 1e-12);
  EXPECT_NEAR(c.cy, 0, 1e-12);
  EXPECT_NEAR(c.cz, 0, 1e-12);
  EXPECT_NEAR(c.yaw, 0, 1e-12);
  EXPECT_EQ(c.l, b.l);
  const RigidPose round = box_pose(b) * to_canonical(b);
  EXPECT_TRUE(round.rotation().isIdentity(1e-12));
  EXPECT_LT(round.translation().norm(), 1e-12);
}

TEST(Poses, RoundTripAndIdentity) {
  CounterRng rng(9);
  const PointCloud cloud = offtrack::testing::random_cloud(rng, 200, 10.0);
  const PointCloud same = apply_pose(RigidPose::identity(), cloud);
  EXPECT_EQ(same.positions(), cloud.positions());

  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.4, Eigen::Vector3d(0.2, -0.5, 1).normalized()).toRotationMatrix();
  const RigidPose p(r, {1, -2, 3});
  const PointCloud back = apply_pose(p.inverse(), apply_pose(p, cloud));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    EXPECT_LT((back.positions()[i] - cloud.positions()[i]).norm(), 1e-9);
  }
  const Eigen::Vector3d x{0.3, 0.1, -2};
  const RigidPose q = RigidPose::from_yaw(1.1, {4, 0, 1});
  EXPECT_LT(((p * q).apply(x) - p.apply(q.apply(x))).norm(), 1e-12);
}

TEST(Poses, BoxYawComposesAndWraps) {
  const Box7 b = box(1, 0, 0, 2, 1, 1, 3.0);
  const Box7 r = apply_pose(RigidPose::from_yaw(0.5, {0, 0, 0}), b);
  EXPECT_NEAR(r.yaw, normalize_yaw(3.5), 1e-12);
  EXPECT_NEAR(r.cx, std::cos(0.5), 1e-12);
  EXPECT_NEAR(r.cy, std::sin(0.5), 1e-12);
}

TEST(PointCloudChannels, SelectAppendZeroFill) {
  PointCloud a;
  a.push_back({0, 0, 0}, 1.0);
  a.push_back({1, 0, 0}, 2.0);
  a.add_channel("t", 5.0);
  PointCloud b;
  b.push_back({2, 0, 0});
  b.add_channel("u", 7.0);
  a.append(b);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a.channel("t"), (std::vector<double>{5, 5, 0}));
  EXPECT_EQ(a.channel("u"), (std::vector<double>{0, 0, 7}));
  const std::vector<std::size_t> pick{2, 0};
  const PointCloud s = a.select(pick);
  EXPECT_EQ(s.channel("u"), (std::vector<double>{7, 0}));
  EXPECT_EQ(s.intensity(), (std::vector<double>{0, 1}));
  a.push_back({3, 0, 0});
  EXPECT_EQ(a.channel("t").back(), 0.0);
}

TEST(Iou3d, InvariantUnderCommonRigidMotion) {
  CounterRng rng(31);
  for (int i = 0; i < 300; ++i) {
    const Box7 a = offtrack::testing::random_box(rng, 2.0);
    const Box7 b = offtrack::testing::random_box(rng, 2.0);
    const RigidPose p = RigidPose::from_yaw(rng.uniform(-kPi, kPi), {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-2, 2)});
    EXPECT_NEAR(iou3d(a, b), iou3d(apply_pose(p, a), apply_pose(p, b)), 1e-9);
    EXPECT_NEAR(bev_iou(a, b), bev_iou(apply_pose(p, a), apply_pose(p, b)), 1e-9);
  }
}

TEST(Iou3d, FullVerticalOverlapEqualsBev) {
  CounterRng rng(32);
  for (int i = 0; i < 300; ++i) {
    const Box7 a = offtrack::testing::random_box(rng, 2.0);
    Box7 b = offtrack::testing::random_box(rng, 2.0);
    b.cz = a.cz;
    b.h = a.h;
    EXPECT_NEAR(iou3d(a, b), bev_iou(a, b), 1e-12);
  }
}
