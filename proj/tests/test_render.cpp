#include <gtest/gtest.h>

#include <random>

#include "discsplat/render/backward.hpp"
#include "discsplat/render/forward.hpp"
#include "support/depth_oracle.hpp"
#include "support/gradcheck.hpp"
#include "support/random_scene.hpp"

using namespace discsplat;
using discsplat::testing::square_camera;

namespace {

CameraIntrinsics cam64() {
  CameraIntrinsics k;
  k.width = k.height = 64;
  k.fx = k.fy = 500;
  k.cx = k.cy = 32;
  return k;
}

Gaussian disc(const Vec3& p, double radius, const Quat& q = Quat::Identity()) {
  Gaussian g;
  g.position = p;
  g.scale = Vec3(radius, radius, 0.1 * radius);
  g.rotation = q;
  g.sh[0] = sh::dc_from_color(Vec3(0.8, 0.4, 0.2));
  g.set_anchor();
  return g;
}

}  // namespace

TEST(Projection, FrontoParallelDiscCovariance) {
  Gaussian g = disc(Vec3(0, 0, 2), 0.1);
  g.scale = Vec3(0.1, 0.1, 0.01);
  auto pg = project_gaussian(g, Pose::identity(), cam64(), 0);
  ASSERT_TRUE(pg);
  EXPECT_NEAR(pg->mean2d.x(), 32, 1e-12);
  EXPECT_NEAR(pg->mean2d.y(), 32, 1e-12);
  EXPECT_NEAR(pg->cov2d(0, 0), 625.3, 1e-9);
  EXPECT_NEAR(pg->cov2d(1, 1), 625.3, 1e-9);
  EXPECT_NEAR(pg->cov2d(0, 1), 0.0, 1e-12);
}

TEST(Projection, BehindCameraIsCulled) {
  EXPECT_FALSE(project_gaussian(disc(Vec3(0, 0, -1), 0.1), Pose::identity(), cam64(), 0));
}

TEST(Projection, RigidInvariance) {
  Gaussian g = disc(Vec3(0.1, -0.05, 2), 0.1, Quat(Eigen::AngleAxisd(0.4, Vec3(1, 2, 3).normalized())));
  Pose pose = se3_exp((Vec6() << 0.01, 0.02, -0.03, 0.05, -0.02, 0.01).finished());
  auto a = project_gaussian(g, pose, cam64(), 0);
  const Vec3 shift(1.5, -2.0, 0.7);
  g.position += shift;
  pose.translation += shift;
  auto b = project_gaussian(g, pose, cam64(), 0);
  ASSERT_TRUE(a && b);
  EXPECT_LT((a->mean2d - b->mean2d).norm(), 1e-9);
  EXPECT_LT((a->cov2d - b->cov2d).norm(), 1e-6);
}

TEST(Tiles, SingleGaussianOneTile) {
  ProjectedGaussian p;
  p.mean2d = Vec2(8, 8);
  p.x_min = p.y_min = 6;
  p.x_max = p.y_max = 10;
  auto t = bin_and_sort({p}, 64, 64, 16);
  size_t nonempty = 0;
  for (size_t i = 0; i < t.tile_count(); ++i) nonempty += t.list_size(i) > 0;
  EXPECT_EQ(nonempty, 1u);
  EXPECT_EQ(t.list_size(0), 1u);
}

TEST(Tiles, SortedNearToFarWithIndexTieBreak) {
  ProjectedGaussian a, b, c;
  for (auto* p : {&a, &b, &c}) {
    p->x_min = p->y_min = 0;
    p->x_max = p->y_max = 5;
  }
  a.view_depth = 2;
  a.source_index = 0;
  b.view_depth = 1;
  b.source_index = 1;
  c.view_depth = 1;
  c.source_index = 2;
  auto t = bin_and_sort({c, a, b}, 16, 16, 16);
  auto list = t.list(0);
  ASSERT_EQ(list.size(), 3u);
  EXPECT_EQ(list[0], 2u);  // b: positions refer to the input vector
  EXPECT_EQ(list[1], 0u);
  EXPECT_EQ(list[2], 1u);
}

TEST(Tiles, FootprintAcrossFourTiles) {
  ProjectedGaussian p;
  p.x_min = 10;
  p.x_max = 20;
  p.y_min = 12;
  p.y_max = 17;
  auto t = bin_and_sort({p}, 64, 64, 16);
  for (size_t i = 0; i < t.tile_count(); ++i) {
    const int tx = static_cast<int>(i % t.tiles_x), ty = static_cast<int>(i / t.tiles_x);
    const bool expect = tx <= 1 && ty <= 1;
    EXPECT_EQ(t.list_size(i), expect ? 1u : 0u) << i;
  }
}

TEST(Tiles, ActiveTilesBoundary) {
  Mask m(32, 16, 0);
  for (int i = 0; i < 127; ++i) m(i % 16, i / 16) = 1;
  for (int i = 0; i < 128; ++i) m(16 + i % 16, i / 16) = 1;
  auto kept = active_tiles(m, 16, 0.5);
  EXPECT_FALSE(kept[0]);
  EXPECT_TRUE(kept[1]);
  EXPECT_EQ(count(Mask(32, 16, 1)), 512u);
  auto all = active_tiles(Mask(32, 16, 1), 16, 0.5);
  EXPECT_TRUE(all[0] && all[1]);
  auto none = active_tiles(Mask(32, 16, 0), 16, 0.5);
  EXPECT_FALSE(none[0] || none[1]);
}

TEST(Forward, EmptyMap) {
  GaussianMap map;
  auto b = render_forward(map, Pose::identity(), cam64());
  for (size_t i = 0; i < b.color.size(); ++i) {
    EXPECT_EQ(b.color[i], Vec3::Zero());
    EXPECT_EQ(b.transmission[i], 1.0);
    EXPECT_EQ(b.depth[i], -1.0);
    EXPECT_TRUE(b.index[i].is_none());
  }
}

TEST(Forward, FrontoParallelDiscDepthAndColor) {
  GaussianMap map;
  Gaussian g = disc(Vec3(0, 0, 2), 0.1);
  map.add(g);
  auto b = render_forward(map, Pose::identity(), cam64());
  EXPECT_EQ(b.depth(32, 32), 2.0);
  const Vec3 c = g.color(Vec3::UnitZ(), map.sh_degree());
  EXPECT_LT((b.color(32, 32) - 0.99 * c).norm(), 1e-12);
  EXPECT_EQ(b.index(32, 32), map.id_of(0));
  EXPECT_LT((b.normal(32, 32) - Vec3(0, 0, -1)).norm(), 1e-12);
}

TEST(Forward, TiltedDiscMatchesPerRayOracle) {
  GaussianMap map;
  map.add(disc(Vec3(0, 0, 2), 0.1, Quat(Eigen::AngleAxisd(M_PI / 6, Vec3::UnitY()))));
  auto b = render_forward(map, Pose::identity(), cam64());
  auto ref = discsplat::testing::per_ray_depth(map, Pose::identity(), cam64());
  size_t hits = 0;
  for (size_t i = 0; i < b.depth.size(); ++i) {
    EXPECT_NEAR(b.depth[i], ref[i], 1e-9);
    hits += b.depth[i] != -1.0;
  }
  EXPECT_GT(hits, 100u);
}

TEST(Forward, TransparentInFrontLeavesDepth) {
  GaussianMap map;
  map.add(disc(Vec3(0, 0, 2), 0.1));
  Gaussian t = disc(Vec3(0, 0, 1.5), 0.01);
  t.kind = GaussianKind::Transparent;
  t.opacity = kTransparentOpacity;
  t.sh[0] = sh::dc_from_color(Vec3(0.1, 0.9, 0.1));
  map.add(t);
  auto b = render_forward(map, Pose::identity(), cam64());
  EXPECT_EQ(b.depth(32, 32), 2.0);
  EXPECT_EQ(b.index(32, 32), map.id_of(0));
  GaussianMap only_opaque;
  only_opaque.add(disc(Vec3(0, 0, 2), 0.1));
  auto o = render_forward(only_opaque, Pose::identity(), cam64());
  EXPECT_GT((b.color(32, 32) - o.color(32, 32)).norm(), 1e-3);
}

TEST(Forward, CompositingOverBackground) {
  std::mt19937_64 rng(7);
  auto s = discsplat::testing::random_scene(rng, 20, 48);
  auto b = render_forward(s.map, s.pose, s.k);
  for (size_t i = 0; i < b.color.size(); ++i) {
    EXPECT_GE(b.transmission[i], 0.0);
    EXPECT_LE(b.transmission[i], 1.0);
    if (b.depth[i] != -1.0) {
      EXPECT_FALSE(b.index[i].is_none());
      EXPECT_NEAR(b.normal[i].norm(), 1.0, 1e-9);
    } else {
      EXPECT_TRUE(b.index[i].is_none());
    }
  }
}

TEST(Forward, TransmissionNonIncreasingWhenAppending) {
  std::mt19937_64 rng(11);
  auto s = discsplat::testing::random_scene(rng, 15, 48);
  auto before = render_forward(s.map, s.pose, s.k);
  Gaussian g;
  g.position = s.pose * Vec3(0, 0, 1.0);
  g.scale = Vec3(0.2, 0.2, 0.02);
  g.set_anchor();
  s.map.add(g);
  auto after = render_forward(s.map, s.pose, s.k);
  for (size_t i = 0; i < before.transmission.size(); ++i)
    EXPECT_LE(after.transmission[i], before.transmission[i] + 1e-15);
}

TEST(Forward, DepthOracleRandomScenes) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    auto s = discsplat::testing::random_scene(rng, 80, 64);
    auto b = render_forward(s.map, s.pose, s.k);
    auto ref = discsplat::testing::per_ray_depth(s.map, s.pose, s.k);
    for (size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(b.depth[i], ref[i], 1e-6) << trial << " " << i;
  }
}

TEST(Forward, MaskedPixelsKeepSentinels) {
  GaussianMap map;
  map.add(disc(Vec3(0, 0, 2), 0.2));
  Mask m(64, 64, 0);
  m(32, 32) = 1;
  RenderOptions opt;
  opt.active_pixels = &m;
  opt.tile_keep_fraction = 0.0;
  auto b = render_forward(map, Pose::identity(), cam64(), opt);
  EXPECT_EQ(b.depth(32, 32), 2.0);
  EXPECT_EQ(b.depth(33, 32), -1.0);
  EXPECT_EQ(b.transmission(33, 32), 1.0);
  EXPECT_FALSE(b.rendered(33, 32));
}

TEST(Forward, AlphaBlendDepthMode) {
  GaussianMap map;
  map.add(disc(Vec3(0, 0, 2), 0.1));
  RenderOptions opt;
  opt.depth_mode = DepthMode::AlphaBlend;
  auto b = render_forward(map, Pose::identity(), cam64(), opt);
  EXPECT_NEAR(b.depth(32, 32), 0.99 * 2.0, 1e-12);
}

TEST(Forward, DeterministicAcrossWorkerCounts) {
  std::mt19937_64 rng(5);
  auto s = discsplat::testing::random_scene(rng, 60, 64);
  worker_override() = 1;
  auto a = render_forward(s.map, s.pose, s.k);
  worker_override() = 4;
  auto b = render_forward(s.map, s.pose, s.k);
  worker_override() = 0;
  EXPECT_EQ(a.color.data, b.color.data);
  EXPECT_EQ(a.depth.data, b.depth.data);
  EXPECT_EQ(a.transmission.data, b.transmission.data);
}

TEST(Backward, ZeroCotangentsGiveZeroGradients) {
  std::mt19937_64 rng(3);
  auto s = discsplat::testing::random_scene(rng, 10, 32);
  auto b = render_forward(s.map, s.pose, s.k);
  auto g = render_backward(s.map, s.pose, s.k, {}, b, ColorImage(32, 32, Vec3::Zero()), DepthImage(32, 32, 0.0));
  for (size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(g.position[i], Vec3::Zero());
    EXPECT_EQ(g.scale[i], Vec3::Zero());
    EXPECT_EQ(g.rotation[i], Vec4::Zero());
  }
}

TEST(Backward, DepthMovesWithCenter) {
  GaussianMap map;
  map.add(disc(Vec3(0, 0, 2), 0.1));
  auto b = render_forward(map, Pose::identity(), cam64());
  DepthImage dd(64, 64, 0.0);
  dd(32, 32) = 1.0;
  auto g = render_backward(map, Pose::identity(), cam64(), {}, b, ColorImage(64, 64, Vec3::Zero()), dd);
  EXPECT_LT((g.position[0] - Vec3(0, 0, 1)).norm(), 1e-9);
}

TEST(Backward, StaleBuffersRejected) {
  GaussianMap map;
  map.add(disc(Vec3(0, 0, 2), 0.1));
  auto b = render_forward(map, Pose::identity(), cam64());
  map.mutable_at(0).position.x() += 0.01;
  EXPECT_THROW(render_backward(map, Pose::identity(), cam64(), {}, b, ColorImage(64, 64, Vec3::Zero()),
                               DepthImage(64, 64, 0.0)),
               StaleSnapshot);
}

TEST(Backward, UnstableOnlyZeroesStable) {
  std::mt19937_64 rng(9);
  auto s = discsplat::testing::random_scene(rng, 10, 32);
  auto target = discsplat::testing::random_target(rng, s.k);
  auto b = render_forward(s.map, s.pose, s.k);
  ColorImage dc;
  DepthImage dd;
  image_loss(b, target, {}, nullptr, &dc, &dd);
  auto g = render_backward(s.map, s.pose, s.k, {}, b, dc, dd, {true});
  for (size_t i = 0; i < g.size(); ++i) {
    if (!s.map[i].is_stable()) continue;
    EXPECT_EQ(g.position[i], Vec3::Zero());
    EXPECT_FALSE(g.has_sh_gradient(i));
  }
}

TEST(Backward, FiniteDifferenceRandomScenes) {
  std::mt19937_64 rng(42);
  size_t checked = 0, passed = 0;
  for (int trial = 0; trial < 6; ++trial) {
    auto s = discsplat::testing::random_scene(rng, 10, 32);
    auto target = discsplat::testing::random_target(rng, s.k);
    auto r = discsplat::testing::gradcheck(s.map, s.pose, s.k, {}, target, {});
    checked += r.checked;
    passed += r.passed;
  }
  EXPECT_GE(static_cast<double>(passed) / checked, 0.95) << "checked " << checked;
}

TEST(Backward, FiniteDifferenceAlphaBlendDepth) {
  std::mt19937_64 rng(43);
  RenderOptions opt;
  opt.depth_mode = DepthMode::AlphaBlend;
  for (int trial = 0; trial < 3; ++trial) {
    auto s = discsplat::testing::random_scene(rng, 10, 32);
    auto target = discsplat::testing::random_target(rng, s.k);
    auto r = discsplat::testing::gradcheck(s.map, s.pose, s.k, opt, target, {});
    EXPECT_GE(r.pass_fraction(), 0.95) << "trial " << trial << " checked " << r.checked;
  }
}
