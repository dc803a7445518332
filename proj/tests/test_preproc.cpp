#include <gtest/gtest.h>

#include <random>

#include "discsplat/preproc/frame_preproc.hpp"

using namespace discsplat;

namespace {

CameraIntrinsics camera(int w = 64, int h = 48) {
  CameraIntrinsics k;
  k.width = w;
  k.height = h;
  k.fx = k.fy = 50.0;
  k.cx = 0.5 * (w - 1);
  k.cy = 0.5 * (h - 1);
  return k;
}

// Depth of the plane z = a + b x, where x = z (u - cx) / fx.
DepthImage plane_depth(const CameraIntrinsics& k, double a, double b) {
  DepthImage d(k.width, k.height, 0.0);
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) d(x, y) = a / (1.0 - b * (x - k.cx) / k.fx);
  return d;
}

}  // namespace

TEST(Backproject, PrincipalRay) {
  CameraIntrinsics k = camera(65, 49);
  DepthImage d(k.width, k.height, 0.0);
  d(32, 24) = 1.0;
  auto m = backproject(d, k);
  EXPECT_TRUE(m.vertices(32, 24).isApprox(Vec3(0, 0, 1), 1e-15));
  EXPECT_EQ(count(m.valid), 1u);
}

TEST(Backproject, UnitTangentOffset) {
  CameraIntrinsics k = camera(128, 49);
  k.fx = 40.0;
  k.cx = 20.0;
  k.cy = 24.0;
  DepthImage d(k.width, k.height, 0.0);
  d(60, 24) = 2.0;
  EXPECT_TRUE(backproject(d, k).vertices(60, 24).isApprox(Vec3(2, 0, 2), 1e-15));
}

TEST(Backproject, ReprojectionRoundTrip) {
  CameraIntrinsics k = camera();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.3, 9.0);
  DepthImage d(k.width, k.height);
  for (double& v : d.data) v = u(rng);
  auto m = backproject(d, k);
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      Vec2 px = k.project(m.vertices(x, y));
      EXPECT_LT((px - Vec2(x, y)).norm(), 1e-6);
    }
}

TEST(Backproject, InvalidDepthsAndMismatch) {
  CameraIntrinsics k = camera();
  DepthImage d(k.width, k.height, 0.0);
  d(3, 3) = -1.0;
  d(4, 4) = 11.0;
  d(5, 5) = std::nan("");
  EXPECT_EQ(count(backproject(d, k).valid), 0u);
  EXPECT_THROW(backproject(DepthImage(10, 10, 1.0), k), InvalidInput);
}

TEST(Normals, FrontoParallel) {
  CameraIntrinsics k = camera();
  auto m = vertex_normal_maps(DepthImage(k.width, k.height, 1.0), k);
  EXPECT_EQ(count(m.normal_valid), static_cast<size_t>((k.width - 2) * (k.height - 2)));
  for (size_t i = 0; i < m.normals.size(); ++i)
    if (m.normal_valid[i]) EXPECT_TRUE(m.normals[i].isApprox(Vec3(0, 0, -1), 1e-12));
}

TEST(Normals, TiltedPlaneMatchesAnalyticGradient) {
  CameraIntrinsics k = camera();
  auto m = vertex_normal_maps(plane_depth(k, 1.0, 0.1), k);
  // Perpendicular to both in-plane directions (1,0,0.1) and (0,1,0), facing the camera.
  const Vec3 expect = Vec3(0, 1, 0).cross(Vec3(1, 0, 0.1)).normalized();
  ASSERT_LT(expect.z(), 0.0);
  ASSERT_GT(count(m.normal_valid), 0u);
  for (size_t i = 0; i < m.normals.size(); ++i)
    if (m.normal_valid[i]) EXPECT_LT((m.normals[i] - expect).norm(), 1e-9);
}

TEST(Normals, IsolatedPixelInvalid) {
  CameraIntrinsics k = camera();
  DepthImage d(k.width, k.height, 0.0);
  d(10, 10) = 1.5;
  auto m = vertex_normal_maps(d, k);
  EXPECT_TRUE(m.valid(10, 10));
  EXPECT_FALSE(m.normal_valid(10, 10));
}

TEST(Normals, DiscontinuityInvalidates) {
  CameraIntrinsics k = camera();
  DepthImage d(k.width, k.height, 1.0);
  for (int y = 0; y < k.height; ++y)
    for (int x = 32; x < k.width; ++x) d(x, y) = 2.0;
  auto m = vertex_normal_maps(d, k);
  EXPECT_FALSE(m.normal_valid(31, 20));
  EXPECT_FALSE(m.normal_valid(32, 20));
  EXPECT_TRUE(m.normal_valid(30, 20));
}

TEST(Normals, UnitAndFacingCamera) {
  CameraIntrinsics k = camera();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  DepthImage d = plane_depth(k, 2.0, -0.3);
  for (double& v : d.data) v += u(rng);
  auto m = vertex_normal_maps(d, k);
  for (size_t i = 0; i < m.normals.size(); ++i) {
    if (!m.normal_valid[i]) continue;
    EXPECT_NEAR(m.normals[i].norm(), 1.0, 1e-12);
    EXPECT_LE(m.normals[i].dot(m.vertices[i]), 0.0);
  }
}

TEST(Bilateral, ConstantUnchanged) {
  DepthImage d(20, 20, 1.7);
  DepthImage f = bilateral_filter(d, 2.0, 0.03);
  for (double v : f.data) EXPECT_NEAR(v, 1.7, 1e-12);
}

TEST(Bilateral, StepEdgePreserved) {
  DepthImage d(20, 20, 1.0);
  for (int y = 0; y < 20; ++y)
    for (int x = 10; x < 20; ++x) d(x, y) = 2.0;
  DepthImage f = bilateral_filter(d, 2.0, 0.05);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) EXPECT_NEAR(f(x, y), d(x, y), 1e-6);
}

TEST(Bilateral, OutlierPulledTowardNeighbors) {
  DepthImage d(9, 9, 1.0);
  d(4, 4) = 1.05;
  DepthImage f = bilateral_filter(d, 2.0, 0.03);
  // Direct kernel evaluation at the outlier.
  double sum = 0.0, wsum = 0.0;
  for (int dy = -2; dy <= 2; ++dy)
    for (int dx = -2; dx <= 2; ++dx) {
      double v = d(4 + dx, 4 + dy);
      double w = std::exp(-(dx * dx + dy * dy) / 8.0 - (v - 1.05) * (v - 1.05) / (2 * 0.03 * 0.03));
      sum += w * v;
      wsum += w;
    }
  EXPECT_NEAR(f(4, 4), sum / wsum, 1e-12);
  EXPECT_LT(f(4, 4), 1.05);
  EXPECT_GT(f(4, 4), 1.0);
}

TEST(Bilateral, InvalidPixelsUntouchedAndIgnored) {
  DepthImage d(9, 9, 1.0);
  d(4, 4) = 0.0;
  d(5, 4) = 1.01;
  DepthImage f = bilateral_filter(d);
  EXPECT_EQ(f(4, 4), 0.0);
  EXPECT_THROW(bilateral_filter(d, 0.0, 0.03), InvalidParameter);
}

TEST(Pyramid, SingleLevelIsIdentity) {
  CameraIntrinsics k = camera();
  DepthImage d = plane_depth(k, 1.0, 0.2);
  auto p = build_pyramid(d, k, 1);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].depth.data, d.data);
  EXPECT_EQ(p[0].intrinsics, k);
}

TEST(Pyramid, HalvingSizes) {
  CameraIntrinsics k = camera(640, 480);
  auto p = build_pyramid(DepthImage(640, 480, 1.2), k, 3);
  ASSERT_EQ(p.size(), 3u);
  const int sizes[3][2] = {{640, 480}, {320, 240}, {160, 120}};
  for (int l = 0; l < 3; ++l) {
    EXPECT_EQ(p[l].depth.width, sizes[l][0]);
    EXPECT_EQ(p[l].depth.height, sizes[l][1]);
    EXPECT_EQ(p[l].intrinsics.width, sizes[l][0]);
    for (double v : p[l].depth.data) EXPECT_EQ(v, 1.2);
  }
  EXPECT_DOUBLE_EQ(p[2].intrinsics.fx, k.fx / 4);
}

TEST(Pyramid, OddSizeTruncates) {
  DepthImage d(11, 7, 1.0);
  DepthImage h = downsample_depth(d);
  EXPECT_EQ(h.width, 5);
  EXPECT_EQ(h.height, 3);
}

TEST(Pyramid, DownsamplePicksValidSampleNearMean) {
  DepthImage d(2, 2, 0.0);
  d(0, 0) = 1.0;
  d(1, 0) = 1.1;
  d(0, 1) = 3.0;
  Image<Vec2> picked;
  DepthImage h = downsample_depth(d, &picked);
  EXPECT_EQ(h(0, 0), 1.1);
  EXPECT_TRUE(picked(0, 0).isApprox(Vec2(1, 0)));
}

TEST(TransformMaps, IdentityAndTranslation) {
  CameraIntrinsics k = camera();
  auto m = vertex_normal_maps(plane_depth(k, 1.5, 0.2), k);
  auto same = transform_maps(m, Pose::identity());
  EXPECT_EQ(same.vertices.data, m.vertices.data);
  Pose t;
  t.translation = Vec3(0.5, -1, 2);
  auto moved = transform_maps(m, t);
  for (size_t i = 0; i < m.vertices.size(); ++i) {
    if (!m.valid[i]) continue;
    EXPECT_TRUE(moved.vertices[i].isApprox(m.vertices[i] + t.translation, 1e-15));
    EXPECT_EQ(moved.normals[i], m.normals[i]);
  }
}

TEST(TransformMaps, QuarterTurnAboutZ) {
  CameraIntrinsics k = camera();
  auto m = vertex_normal_maps(plane_depth(k, 1.5, 0.2), k);
  Pose r;
  r.rotation = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()).toRotationMatrix();
  auto out = transform_maps(m, r);
  for (size_t i = 0; i < m.vertices.size(); ++i) {
    if (!m.normal_valid[i]) continue;
    const Vec3 v = m.vertices[i], n = m.normals[i];
    EXPECT_TRUE(out.vertices[i].isApprox(Vec3(-v.y(), v.x(), v.z()), 1e-12));
    EXPECT_TRUE(out.normals[i].isApprox(Vec3(-n.y(), n.x(), n.z()), 1e-12));
    EXPECT_NEAR(out.normals[i].norm(), 1.0, 1e-12);
  }
}
