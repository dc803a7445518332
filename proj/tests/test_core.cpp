#include <gtest/gtest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "discsplat/core/camera.hpp"
#include "discsplat/core/gaussian.hpp"
#include "discsplat/core/gaussian_map.hpp"
#include "discsplat/core/se3.hpp"
#include "discsplat/core/sh.hpp"
#include "support/random_scene.hpp"

using namespace discsplat;

namespace {

Quat rot_x(double deg) { return Quat(Eigen::AngleAxisd(deg * M_PI / 180.0, Vec3::UnitX())); }

Vec3 sorted(Vec3 v) {
  std::sort(v.data(), v.data() + 3);
  return v;
}

}  // namespace

TEST(Covariance, Isotropic) {
  EXPECT_TRUE(covariance_from(Vec3(1, 1, 1), Quat::Identity()).isApprox(Mat3::Identity(), 1e-15));
}

TEST(Covariance, AxisAligned) {
  Mat3 expect = Vec3(4, 1, 1).asDiagonal();
  EXPECT_TRUE(covariance_from(Vec3(2, 1, 1), Quat::Identity()).isApprox(expect, 1e-15));
}

TEST(Covariance, RotatedDiscAgainstEigenSolver) {
  Mat3 c = covariance_from(Vec3(1, 1, 0.1), rot_x(90));
  Eigen::SelfAdjointEigenSolver<Mat3> es(c);
  EXPECT_NEAR(es.eigenvalues()[0], 0.01, 1e-12);
  EXPECT_NEAR(es.eigenvalues()[1], 1.0, 1e-12);
  EXPECT_NEAR(es.eigenvalues()[2], 1.0, 1e-12);
  EXPECT_NEAR(std::abs(es.eigenvectors().col(0).dot(Vec3::UnitY())), 1.0, 1e-12);
}

TEST(Covariance, NonUnitQuaternionRejected) {
  Quat q(1.1, 0, 0, 0);
  EXPECT_THROW(covariance_from(Vec3(1, 1, 1), q), InvalidParameter);
}

TEST(Covariance, EigenvaluesAreSquaredScales) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> s(0.01, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vec3 scale(s(rng), s(rng), s(rng));
    Quat q = discsplat::testing::random_quaternion(rng);
    Mat3 c = covariance_from(scale, q);
    EXPECT_TRUE(c.isApprox(c.transpose(), 1e-14));
    Eigen::SelfAdjointEigenSolver<Mat3> es(c);
    Vec3 expect = sorted(scale.cwiseProduct(scale));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(es.eigenvalues()[i], expect[i], 1e-9);
  }
}

TEST(Normal, AxisAlignedDisc) {
  Gaussian g;
  g.scale = Vec3(1, 1, 0.1);
  EXPECT_NEAR(std::abs(gaussian_normal(g).z()), 1.0, 1e-12);
}

TEST(Normal, RotatedDiscMatchesEigenOracle) {
  Gaussian g;
  g.scale = Vec3(1, 1, 0.1);
  g.rotation = rot_x(90);
  Vec3 n = gaussian_normal(g);
  EXPECT_NEAR(std::abs(n.y()), 1.0, 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat3> es(covariance_from(g.scale, g.rotation));
  EXPECT_NEAR(std::abs(n.dot(es.eigenvectors().col(0))), 1.0, 1e-12);
}

TEST(Normal, FullyDegenerateUsesTieBreakAxis) {
  Gaussian g;
  g.scale = Vec3(1, 1, 1);
  g.rotation = rot_x(90);
  EXPECT_EQ(normal_axis(g.scale), 2);
  EXPECT_TRUE(gaussian_normal(g).isApprox(rotation_matrix(g.rotation).col(2), 1e-15));
}

TEST(Normal, PartialTieAmongSmallest) {
  EXPECT_EQ(normal_axis(Vec3(0.1, 0.1, 1.0)), 1);
  EXPECT_EQ(normal_axis(Vec3(0.1, 1.0, 0.1)), 2);
  EXPECT_EQ(normal_axis(Vec3(0.1, 1.0, 2.0)), 0);
}

TEST(Normal, OrientedTowardViewer) {
  Gaussian g;
  g.scale = Vec3(1, 1, 0.1);
  EXPECT_LT(gaussian_normal(g, Vec3(0, 0, -5)).z(), 0.0);
  EXPECT_GT(gaussian_normal(g, Vec3(0, 0, 5)).z(), 0.0);
}

TEST(Normal, PerpendicularToLongestAxis) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> s(0.01, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    Gaussian g;
    g.scale = Vec3(s(rng), s(rng), s(rng));
    g.rotation = discsplat::testing::random_quaternion(rng);
    int longest;
    g.scale.maxCoeff(&longest);
    if (normal_axis(g.scale) == longest) continue;
    EXPECT_NEAR(gaussian_normal(g).dot(rotation_matrix(g.rotation).col(longest)), 0.0, 1e-6);
    EXPECT_NEAR(gaussian_normal(g).norm(), 1.0, 1e-12);
  }
}

TEST(Se3, ExpOfZeroIsIdentity) {
  Pose p = se3_exp(Vec6::Zero());
  EXPECT_TRUE(p.rotation.isApprox(Mat3::Identity()));
  EXPECT_TRUE(p.translation.isZero());
}

TEST(Se3, QuarterTurnAboutZ) {
  Vec6 xi;
  xi << 0, 0, 0, 0, 0, M_PI / 2;
  Pose p = se3_exp(xi);
  Mat3 expect;
  expect << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_TRUE(p.rotation.isApprox(expect, 1e-12));
  EXPECT_NEAR(p.translation.norm(), 0.0, 1e-15);
}

TEST(Se3, ComposeWithInverse) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.7);
  for (int i = 0; i < 50; ++i) {
    Vec6 xi;
    for (int j = 0; j < 6; ++j) xi[j] = n(rng);
    Pose p = se3_exp(xi);
    Pose id = compose(p, inverse(p));
    EXPECT_LT((id.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(id.translation.norm(), 1e-9);
  }
}

TEST(Se3, FirstOrderConsistency) {
  Vec6 xi;
  xi << 0.3, -0.2, 0.1, 0.2, 0.4, -0.3;
  for (double eps : {1e-3, 1e-4, 1e-5}) {
    Pose p = se3_exp(eps * xi);
    Mat3 approx = Mat3::Identity() + hat(eps * xi.tail<3>());
    EXPECT_LT((p.rotation - approx).norm(), 10 * eps * eps);
    EXPECT_LT((p.translation - eps * xi.head<3>()).norm(), 10 * eps * eps);
  }
}

TEST(Se3, Associativity) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 0.5);
  auto rnd = [&] {
    Vec6 xi;
    for (int j = 0; j < 6; ++j) xi[j] = n(rng);
    return se3_exp(xi);
  };
  for (int i = 0; i < 20; ++i) {
    Pose a = rnd(), b = rnd(), c = rnd();
    Pose l = compose(compose(a, b), c), r = compose(a, compose(b, c));
    EXPECT_TRUE(l.matrix().isApprox(r.matrix(), 1e-12));
  }
}

TEST(Se3, LogInvertsExp) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Vec3 axis = Vec3(u(rng), u(rng), u(rng)).normalized();
    double angle = std::abs(u(rng)) * (M_PI - 1e-3);
    Vec6 xi;
    xi << 2 * u(rng), 2 * u(rng), 2 * u(rng), angle * axis;
    Pose p = se3_exp(xi);
    Pose q = se3_exp(se3_log(p));
    EXPECT_TRUE(p.matrix().isApprox(q.matrix(), 1e-9));
  }
}

TEST(Se3, PoseValidity) {
  Pose p;
  EXPECT_TRUE(p.is_valid());
  p.rotation(0, 0) = -1.0;
  EXPECT_FALSE(p.is_valid());
}

TEST(Intrinsics, Validation) {
  CameraIntrinsics k{500, 500, 319.5, 239.5, 640, 480, 5000};
  EXPECT_NO_THROW(k.validate());
  k.cx = 700;
  EXPECT_THROW(k.validate(), InvalidParameter);
  k.cx = 319.5;
  k.fx = 0;
  EXPECT_THROW(k.validate(), InvalidParameter);
}

TEST(Sh, DcInversionReproducesColor) {
  Gaussian g;
  const Vec3 c(0.2, 0.55, 0.9);
  g.sh[0] = sh::dc_from_color(c);
  EXPECT_TRUE(g.color(Vec3(0.3, -0.2, 0.9).normalized(), 2).isApprox(c, 1e-14));
}

TEST(Sh, BasisGradientMatchesFiniteDifference) {
  const Vec3 d = Vec3(0.3, -0.4, 0.8).normalized();
  auto b = sh::evaluate(d, 3, true);
  const double h = 1e-6;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 dp = d, dm = d;
    dp[axis] += h;
    dm[axis] -= h;
    auto bp = sh::evaluate(dp, 3, false), bm = sh::evaluate(dm, 3, false);
    for (int k = 0; k < sh::coeff_count(3); ++k)
      EXPECT_NEAR(b.grad[k][axis], (bp.value[k] - bm.value[k]) / (2 * h), 1e-6);
  }
}

TEST(GaussianInvariants, OpacityMustMatchKind) {
  Gaussian g;
  EXPECT_TRUE(satisfies_invariants(g));
  g.kind = GaussianKind::Transparent;
  EXPECT_FALSE(satisfies_invariants(g));
  g.opacity = kTransparentOpacity;
  EXPECT_TRUE(satisfies_invariants(g));
  g.scale.x() = 0.0;
  EXPECT_FALSE(satisfies_invariants(g));
}

TEST(GaussianMapTest, RecycledSlotGetsNewGeneration) {
  GaussianMap m(0);
  GaussianId a = m.add(Gaussian());
  GaussianId b = m.add(Gaussian());
  m.remove(static_cast<size_t>(a.index));
  EXPECT_FALSE(m.is_live(a));
  EXPECT_TRUE(m.is_live(b));
  GaussianId c = m.add(Gaussian());
  EXPECT_EQ(c.index, a.index);
  EXPECT_NE(c.generation, a.generation);
  EXPECT_FALSE(m.is_live(a));
  EXPECT_TRUE(m.is_live(c));
  EXPECT_THROW(m.at(a), InvalidInput);
}

TEST(GaussianMapTest, RemovingDeadSlotThrows) {
  GaussianMap m(0);
  GaussianId a = m.add(Gaussian());
  m.remove(static_cast<size_t>(a.index));
  EXPECT_THROW(m.remove(static_cast<size_t>(a.index)), InvalidInput);
}

TEST(GaussianMapTest, PartitionCountsAndReconciliation) {
  GaussianMap m(1);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    Gaussian g;
    g.state = (rng() & 1) ? GaussianState::Stable : GaussianState::Unstable;
    m.add(g);
  }
  for (size_t i = 0; i < 100; i += 3) m.remove(i);
  size_t stable = 0, unstable = 0;
  m.for_each_live([&](size_t, const Gaussian& g) { ++(g.is_stable() ? stable : unstable); });
  EXPECT_EQ(m.stable_count(), stable);
  EXPECT_EQ(m.unstable_count(), unstable);
  EXPECT_EQ(m.total_added() - m.total_removed(), m.live_count());
}

TEST(GaussianMapTest, MutationBumpsRevision) {
  GaussianMap m(0);
  m.add(Gaussian());
  const uint64_t r = m.revision();
  (void)m[0];
  EXPECT_EQ(m.revision(), r);
  m.mutable_at(0).position.x() = 1.0;
  EXPECT_GT(m.revision(), r);
}

TEST(GaussianMapTest, ShDegreeBounds) {
  EXPECT_THROW(GaussianMap(4), InvalidParameter);
  EXPECT_EQ(GaussianMap(2).sh_coeffs(), 9);
}
