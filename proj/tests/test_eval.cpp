#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "discsplat/eval/fit_frame.hpp"
#include "discsplat/eval/pipeline.hpp"
#include "discsplat/eval/scene.hpp"

using namespace discsplat;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("discsplat_eval_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Trajectory circle(int n, double radius) {
  Trajectory t;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    Pose p;
    p.translation = Vec3(radius * std::cos(a), radius * std::sin(a), 0.3 * std::sin(3 * a));
    t.push_back({0.1 * i, p});
  }
  return t;
}

}  // namespace

TEST(Ate, IdenticalIsZero) {
  Trajectory gt = circle(50, 1.0);
  EXPECT_NEAR(ate_rmse(gt, gt), 0.0, 1e-9);
}

TEST(Ate, RigidOffsetAbsorbed) {
  Trajectory gt = circle(50, 1.0), est = gt;
  Pose offset = se3_exp((Vec6() << 0.3, -1.0, 2.0, 0.2, -0.4, 0.9).finished());
  for (auto& p : est) p.pose = compose(offset, p.pose);
  EXPECT_NEAR(ate_rmse(est, gt), 0.0, 1e-8);
}

TEST(Ate, RadialNoiseMatchesRmse) {
  Trajectory gt = circle(400, 1.0), est = gt;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.01);
  for (auto& p : est) {
    Vec3 radial = Vec3(p.pose.translation.x(), p.pose.translation.y(), 0).normalized();
    p.pose.translation += n(rng) * radial;
  }
  EXPECT_NEAR(ate_rmse(est, gt), 1.0, 0.2);
}

TEST(Ate, TooFewPairs) {
  Trajectory gt = circle(10, 1.0), est = circle(10, 1.0);
  for (auto& p : est) p.timestamp += 0.05;
  EXPECT_THROW(ate_rmse(est, gt), EvaluationError);
  EXPECT_THROW(ate_rmse(Trajectory(gt.begin(), gt.begin() + 2), gt), EvaluationError);
}

TEST(Psnr, ClosedForms) {
  ColorImage a(8, 8, Vec3::Constant(0.4)), b(8, 8, Vec3::Constant(0.5));
  EXPECT_EQ(psnr(a, a), kPsnrIdentical);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  EXPECT_THROW(psnr(a, ColorImage(4, 4)), InvalidInput);
}

TEST(DepthRatio, Cases) {
  DepthImage d(10, 10, 2.0);
  d(0, 0) = 0.0;
  EXPECT_EQ(depth_accuracy_ratio(DepthImage(10, 10, -1.0), d, 0.01), 0.0);
  DepthImage r(10, 10, 2.005);
  r(1, 0) = 2.02;
  EXPECT_NEAR(depth_accuracy_ratio(r, d, 0.01), 100.0 * 98.0 / 99.0, 1e-9);
  EXPECT_THROW(depth_accuracy_ratio(r, d, 0.0), InvalidParameter);
  EXPECT_THROW(depth_accuracy_ratio(r, DepthImage(10, 10, 0.0), 0.01), EvaluationError);
}

TEST(FitFrame, FrontoParallelPlane) {
  CameraIntrinsics k = SceneSpec().intrinsics();
  RGBDFrame f;
  f.depth = DepthImage(k.width, k.height, 2.0);
  f.color = ColorImage(k.width, k.height, Vec3(0.6, 0.5, 0.3));
  FitOptions opt;
  opt.gaussian_count = 500;
  FitReport rep = fit_frame(f, k, opt);
  EXPECT_EQ(rep.gaussians, 500);
  EXPECT_GE(rep.depth_ratio, 99.0);
  EXPECT_EQ(rep.losses.size(), 30u);
}

TEST(FitFrame, CompactAtLeastAlphaBlend) {
  SceneSpec spec;
  spec.geometry = "planes";
  spec.trajectory = "static";
  spec.width = 160;
  spec.height = 120;
  SyntheticScene scene(spec);
  CameraIntrinsics k = spec.intrinsics();
  RGBDFrame f = scene.render(scene.poses()[0], k);
  FitOptions opt;
  opt.gaussian_count = 500;
  const double compact = fit_frame(f, k, opt).depth_ratio;
  opt.mode = DepthMode::AlphaBlend;
  const double blend = fit_frame(f, k, opt).depth_ratio;
  EXPECT_GE(compact, blend);
}

TEST(FitFrame, ZeroCountRejected) {
  CameraIntrinsics k = SceneSpec().intrinsics();
  RGBDFrame f{ColorImage(k.width, k.height), DepthImage(k.width, k.height, 1.0)};
  FitOptions opt;
  opt.gaussian_count = 0;
  EXPECT_THROW(fit_frame(f, k, opt), InvalidParameter);
}

TEST(MakeScene, DefaultRoomLoads) {
  SceneSpec spec;
  spec.frames = 100;
  spec.width = 32;
  spec.height = 24;
  const fs::path dir = fresh_dir("room");
  make_scene(spec, dir.string());
  SequenceSource src = load_sequence(dir.string());
  EXPECT_EQ(src.size(), 100u);
  EXPECT_EQ(src.dropped, 0u);
  fs::remove_all(dir);
}

TEST(MakeScene, WallAlongOpticalAxis) {
  SceneSpec spec;
  SyntheticScene scene(spec);
  Pose p = SyntheticScene::look_at(Vec3(0, 0, 1.25), Vec3(1, 0, 1.25));
  auto [t, color] = scene.trace(p.translation, p.rotation * Vec3::UnitZ());
  EXPECT_EQ(t, 2.0);
  EXPECT_GT(color.minCoeff(), 0.0);
}

TEST(MakeScene, SameSpecSameBytes) {
  SceneSpec spec = parse_scene_spec("frames=3,width=64,height=48,seed=5");
  const fs::path a = fresh_dir("a"), b = fresh_dir("b");
  make_scene(spec, a.string());
  make_scene(spec, b.string());
  size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a))) << e.path();
  }
  EXPECT_EQ(files, 7u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(MakeScene, InvalidFieldNamed) {
  try {
    parse_scene_spec("frames=3,bogus=1");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  EXPECT_THROW(parse_scene_spec("width=30").validate(), ConfigError);
  EXPECT_THROW(SyntheticScene(parse_scene_spec("width=30")), ConfigError);
}

TEST(Pipeline, StaticCameraSmoke) {
  SceneSpec spec = parse_scene_spec("trajectory=static,frames=10,width=160,height=120");
  const fs::path dir = fresh_dir("static");
  SequenceSource src = make_scene(spec, dir.string());
  RunConfig cfg;
  cfg.serial = true;
  const fs::path out = dir / "out";
  RunResult r = run_pipeline(src, cfg, out.string());
  ASSERT_TRUE(r.report.ate_cm.has_value());
  EXPECT_LT(*r.report.ate_cm, 0.1);
  for (const auto& tp : r.trajectory) EXPECT_LT(tp.pose.translation.norm(), 1e-3);
  EXPECT_EQ(r.report.frames.size(), 10u);
  EXPECT_EQ(r.report.added - r.report.removed, r.report.live);
  EXPECT_EQ(r.report.tracking_lost, 0u);
  for (const char* f : {"trajectory.txt", "map.ply", "report.jsonl", "summary.txt"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_EQ(load_trajectory((out / "trajectory.txt").string()).size(), 10u);

  RunResult again = run_pipeline(src, cfg);
  EXPECT_EQ(again.report.added, r.report.added);
  EXPECT_EQ(again.report.removed, r.report.removed);
  EXPECT_EQ(encode_ply(again.map), encode_ply(r.map));
  fs::remove_all(dir);
}

TEST(Pipeline, EmptyDatasetFails) {
  SequenceSource src;
  src.intrinsics = SceneSpec().intrinsics();
  EXPECT_THROW(run_pipeline(src, RunConfig()), LoadError);
}
