#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "discsplat/discsplat.hpp"

namespace fs = std::filesystem;
using namespace discsplat;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kLoad = 2, kConfig = 3, kTracking = 4, kEvaluation = 5 };

void ensure_dir(const std::string& d) {
  if (!d.empty()) fs::create_directories(d);
}

Pose parse_pose(const std::vector<double>& v) {
  if (v.size() != 7) throw ConfigError("--pose expects tx ty tz qx qy qz qw");
  return Pose::from_quaternion(Quat(v[6], v[3], v[4], v[5]).normalized(), Vec3(v[0], v[1], v[2]));
}

struct RunArgs {
  std::string dataset, config_file, preset, out = "out";
  std::optional<uint64_t> seed;
  bool serial = false;
  bool jsonl = false;
  std::map<std::string, std::string> keys;
};

int cmd_run(const RunArgs& a) {
  RunConfig cfg;
  if (!a.preset.empty()) apply_config_value(cfg, "preset", a.preset);
  if (!a.config_file.empty()) apply_config_file(cfg, a.config_file);
  for (const auto& [k, v] : a.keys) apply_config_value(cfg, k, v);
  if (a.seed) cfg.seed = *a.seed;
  if (a.serial) cfg.serial = true;
  cfg.validate();
  const SequenceSource src = load_sequence(a.dataset);
  RunResult r = run_pipeline(src, cfg, a.out);
  if (a.jsonl) std::cout << report_lines(r.report);
  std::cout << summary_table(r.report);
  return kOk;
}

struct RenderArgs {
  std::string map, dataset, trajectory, out = "render";
  std::vector<double> pose, intrinsics;
  int frame = -1;
};

int cmd_render(const RenderArgs& a) {
  GaussianMap map = import_ply(a.map);
  CameraIntrinsics k;
  std::optional<SequenceSource> src;
  if (!a.dataset.empty()) {
    src = load_sequence(a.dataset);
    k = src->intrinsics;
  }
  if (!a.intrinsics.empty()) {
    if (a.intrinsics.size() != 6) throw ConfigError("--intrinsics expects fx fy cx cy width height");
    k.fx = a.intrinsics[0];
    k.fy = a.intrinsics[1];
    k.cx = a.intrinsics[2];
    k.cy = a.intrinsics[3];
    k.width = static_cast<int>(a.intrinsics[4]);
    k.height = static_cast<int>(a.intrinsics[5]);
  }
  if (k.width == 0) throw ConfigError("render: give --dataset or --intrinsics");
  k.validate();

  std::vector<std::pair<std::string, Pose>> views;
  if (!a.pose.empty()) {
    views.push_back({"view", parse_pose(a.pose)});
  } else if (!a.trajectory.empty()) {
    const Trajectory t = load_trajectory(a.trajectory);
    for (size_t i = 0; i < t.size(); ++i)
      if (a.frame < 0 || static_cast<size_t>(a.frame) == i) views.push_back({std::to_string(i), t[i].pose});
  } else if (src) {
    for (size_t i = 0; i < src->size(); ++i) {
      if (a.frame >= 0 && static_cast<size_t>(a.frame) != i) continue;
      if (!src->frames[i].pose) throw LoadError("dataset frame " + std::to_string(i) + " has no pose");
      views.push_back({std::to_string(i), *src->frames[i].pose});
    }
  } else {
    throw ConfigError("render: give --pose, --trajectory or a dataset with poses");
  }
  ensure_dir(a.out);
  for (const auto& [name, pose] : views) {
    const RenderBuffers b = render_forward(map, pose, k);
    DepthImage d = b.depth;
    for (double& v : d.data) v = std::max(v, 0.0);
    const fs::path base = fs::path(a.out) / name;
    png::write_color(base.string() + "_color.png", b.color);
    png::write_depth(base.string() + "_depth.png", d, k.depth_scale);
  }
  std::cout << "rendered " << views.size() << " view(s) into " << a.out << "\n";
  return kOk;
}

struct EvalArgs {
  std::string estimate, ground_truth, image, reference, depth, reference_depth;
  double depth_scale = kTumDepthScale;
  double tau = 0.01;
};

int cmd_eval(const EvalArgs& a) {
  nlohmann::json j;
  if (!a.estimate.empty() || !a.ground_truth.empty()) {
    if (a.estimate.empty() || a.ground_truth.empty()) throw ConfigError("eval: ATE needs --estimate and --ground-truth");
    const Trajectory gt = fs::is_directory(a.ground_truth) ? ground_truth_of(load_sequence(a.ground_truth))
                                                           : load_trajectory(a.ground_truth);
    j["ate_cm"] = ate_rmse(load_trajectory(a.estimate), gt);
  }
  if (!a.image.empty()) {
    if (a.reference.empty()) throw ConfigError("eval: --image needs --reference");
    const double p = psnr(png::read_color(a.image), png::read_color(a.reference));
    j["psnr"] = std::isinf(p) ? nlohmann::json("inf") : nlohmann::json(p);
  }
  if (!a.depth.empty()) {
    if (a.reference_depth.empty()) throw ConfigError("eval: --depth needs --reference-depth");
    DepthImage d = png::read_depth(a.depth, a.depth_scale);
    for (double& v : d.data)
      if (v <= 0.0) v = -1.0;
    j["depth_ratio"] = depth_accuracy_ratio(d, png::read_depth(a.reference_depth, a.depth_scale), a.tau);
  }
  if (j.empty()) throw ConfigError("eval: nothing to evaluate");
  std::cout << j.dump() << "\n";
  return kOk;
}

struct FitArgs {
  std::string dataset, mode = "compact", out;
  int frame = 0;
  int count = 1000;
  int iterations = FitOptions{}.iterations;
  uint64_t seed = 0;
};

int cmd_fit(const FitArgs& a) {
  RGBDFrame frame;
  CameraIntrinsics k;
  if (a.dataset.empty()) {
    SceneSpec spec = parse_scene_spec("geometry=planes trajectory=static frames=1");
    SyntheticScene scene(spec);
    k = spec.intrinsics();
    frame = scene.render(scene.poses()[0], k);
  } else {
    const SequenceSource src = load_sequence(a.dataset);
    if (a.frame < 0 || static_cast<size_t>(a.frame) >= src.size()) throw ConfigError("fit-frame: --frame out of range");
    k = src.intrinsics;
    frame = load_frame(src, static_cast<size_t>(a.frame));
    frame.depth = sanitize_depth(std::move(frame.depth));
  }
  FitOptions opt;
  opt.gaussian_count = a.count;
  opt.iterations = a.iterations;
  opt.seed = a.seed;
  if (a.mode == "compact") opt.mode = DepthMode::Compact;
  else if (a.mode == "alpha_blend_depth" || a.mode == "alpha") opt.mode = DepthMode::AlphaBlend;
  else throw ConfigError("fit-frame: unknown mode '" + a.mode + "'");
  const FitReport r = fit_frame(frame, k, opt);
  nlohmann::json j = {{"mode", a.mode},        {"gaussians", r.gaussians}, {"iterations", r.iterations},
                      {"depth_ratio", r.depth_ratio}, {"psnr", r.psnr},   {"seconds", r.seconds}};
  std::cout << j.dump() << "\n";
  if (!a.out.empty()) {
    ensure_dir(a.out);
    std::ofstream(fs::path(a.out) / "fit.json") << j.dump(2) << "\n";
    png::write_scalar((fs::path(a.out) / "depth_error.png").string(), r.depth_error, 0.0, 0.05);
    png::write_scalar((fs::path(a.out) / "color_error.png").string(), r.color_error, 0.0, 0.25);
    png::write_color((fs::path(a.out) / "render.png").string(), r.final_render.color);
  }
  return kOk;
}

struct SceneArgs {
  std::vector<std::string> fields;
  std::string out = "scene";
};

int cmd_make_scene(const SceneArgs& a) {
  SceneSpec spec;
  for (const auto& f : a.fields) spec = parse_scene_spec(f, spec);
  spec.validate();
  const SequenceSource src = make_scene(spec, a.out);
  std::cout << "wrote " << src.size() << " frames to " << a.out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compact-Gaussian RGBD SLAM toolkit"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Track and map an RGBD sequence");
  run_cmd->add_option("dataset", run.dataset, "Synthetic or TUM-style dataset directory")->required();
  run_cmd->add_option("--config", run.config_file, "key = value config file");
  run_cmd->add_option("--preset", run.preset, "synthetic | tum | large_scale");
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--seed", run.seed, "Random seed");
  run_cmd->add_flag("--serial", run.serial, "No frame prefetching");
  run_cmd->add_flag("--jsonl", run.jsonl, "Also print the per-frame report to stdout");
  for (const auto& key : config_keys()) {
    if (key == "seed" || key == "serial") continue;
    run_cmd->add_option_function<std::string>(
        "--" + key, [&run, key](const std::string& v) { run.keys[key] = v; }, "config key " + key);
  }

  RenderArgs render;
  auto* render_cmd = app.add_subcommand("render", "Render a PLY map from given poses");
  render_cmd->add_option("--map", render.map, "Map PLY")->required();
  render_cmd->add_option("--dataset", render.dataset, "Dataset for intrinsics and poses");
  render_cmd->add_option("--trajectory", render.trajectory, "Poses to render");
  render_cmd->add_option("--pose", render.pose, "tx ty tz qx qy qz qw")->expected(7);
  render_cmd->add_option("--intrinsics", render.intrinsics, "fx fy cx cy width height")->expected(6);
  render_cmd->add_option("--frame", render.frame, "Only this frame index");
  render_cmd->add_option("--out", render.out, "Output directory");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Trajectory and image metrics");
  eval_cmd->add_option("--estimate", ev.estimate, "Estimated trajectory");
  eval_cmd->add_option("--ground-truth", ev.ground_truth, "Ground-truth trajectory or dataset directory");
  eval_cmd->add_option("--image", ev.image, "Rendered color PNG");
  eval_cmd->add_option("--reference", ev.reference, "Reference color PNG");
  eval_cmd->add_option("--depth", ev.depth, "Rendered depth PNG");
  eval_cmd->add_option("--reference-depth", ev.reference_depth, "Reference depth PNG");
  eval_cmd->add_option("--depth-scale", ev.depth_scale, "Depth units per meter");
  eval_cmd->add_option("--tau", ev.tau, "Depth accuracy threshold (m)");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit-frame", "Fit Gaussians to a single RGBD frame");
  fit_cmd->add_option("--dataset", fit.dataset, "Dataset (default: built-in multi-plane frame)");
  fit_cmd->add_option("--frame", fit.frame, "Frame index");
  fit_cmd->add_option("--count", fit.count, "Gaussian budget");
  fit_cmd->add_option("--mode", fit.mode, "compact | alpha_blend_depth");
  fit_cmd->add_option("--iterations", fit.iterations, "Optimization iterations");
  fit_cmd->add_option("--seed", fit.seed, "Random seed");
  fit_cmd->add_option("--out", fit.out, "Directory for report and heatmaps");

  SceneArgs scene;
  auto* scene_cmd = app.add_subcommand("make-scene", "Write a synthetic RGBD dataset");
  scene_cmd->add_option("spec", scene.fields, "key=value fields, e.g. geometry=planes frames=50");
  scene_cmd->add_option("--out", scene.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*render_cmd) return cmd_render(render);
    if (*eval_cmd) return cmd_eval(ev);
    if (*fit_cmd) return cmd_fit(fit);
    if (*scene_cmd) return cmd_make_scene(scene);
  } catch (const LoadError& e) {
    std::cerr << "load error: " << e.what() << "\n";
    return kLoad;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const TrackingLost& e) {
    std::cerr << "tracking lost: " << e.what() << "\n";
    return kTracking;
  } catch (const EvaluationError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return kEvaluation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
