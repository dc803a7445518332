#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "discsplat/eval/metrics.hpp"
#include "discsplat/global/keyframes.hpp"
#include "discsplat/io/config.hpp"
#include "discsplat/io/ply.hpp"
#include "discsplat/io/png.hpp"
#include "discsplat/io/sequence.hpp"
#include "discsplat/io/trajectory.hpp"
#include "discsplat/mapping/adding.hpp"
#include "discsplat/mapping/masks.hpp"
#include "discsplat/mapping/optimizer.hpp"
#include "discsplat/mapping/state.hpp"
#include "discsplat/preproc/frame_preproc.hpp"
#include "discsplat/tracking/icp.hpp"

namespace discsplat {

struct FrameRecord {
  int frame = 0;
  double timestamp = 0.0;
  double track_ms = 0.0;
  double map_ms = 0.0;
  bool tracking_lost = false;
  size_t icp_inliers = 0;
  AddCounts added;
  /// Set on frames that close an optimization window.
  bool window_end = false;
  int window_iterations = 0;
  double window_ms = 0.0;
  StateReport states;
  bool keyframe = false;
  int global_passes = 0;
  size_t live = 0;
  size_t stable = 0;
  size_t unstable = 0;
  uint64_t removed_total = 0;
};

struct RunReport {
  std::vector<FrameRecord> frames;
  uint64_t seed = 0;
  std::map<std::string, std::string> config;
  uint64_t added = 0;
  uint64_t removed = 0;
  size_t live = 0;
  size_t keyframes = 0;
  int refinement_passes = 0;
  size_t tracking_lost = 0;
  std::optional<double> ate_cm;
  /// Means over all frames, rendered at the estimated poses after refinement.
  double mean_psnr = 0.0;
  double mean_depth_ratio = 0.0;
  double seconds = 0.0;
};

struct RunResult {
  RunReport report;
  GaussianMap map;
  Trajectory trajectory;
  KeyframeStore keyframes;
};

inline nlohmann::json to_json(const FrameRecord& r) {
  return {{"type", "frame"},
          {"frame", r.frame},
          {"timestamp", r.timestamp},
          {"track_ms", r.track_ms},
          {"map_ms", r.map_ms},
          {"tracking_lost", r.tracking_lost},
          {"icp_inliers", r.icp_inliers},
          {"added_opaque", r.added.opaque},
          {"added_transparent", r.added.transparent},
          {"add_skipped", r.added.skipped},
          {"window_end", r.window_end},
          {"window_iterations", r.window_iterations},
          {"window_ms", r.window_ms},
          {"demoted", r.states.demoted},
          {"promoted", r.states.promoted},
          {"removed", r.states.removed},
          {"error_increments", r.states.error_increments},
          {"keyframe", r.keyframe},
          {"global_passes", r.global_passes},
          {"live", r.live},
          {"stable", r.stable},
          {"unstable", r.unstable},
          {"removed_total", r.removed_total}};
}

inline nlohmann::json summary_json(const RunReport& r) {
  nlohmann::json j = {{"type", "summary"},
                      {"seed", r.seed},
                      {"frames", r.frames.size()},
                      {"added", r.added},
                      {"removed", r.removed},
                      {"live", r.live},
                      {"keyframes", r.keyframes},
                      {"refinement_passes", r.refinement_passes},
                      {"tracking_lost", r.tracking_lost},
                      {"mean_psnr", r.mean_psnr},
                      {"mean_depth_ratio", r.mean_depth_ratio},
                      {"seconds", r.seconds},
                      {"config", r.config}};
  j["ate_cm"] = r.ate_cm ? nlohmann::json(*r.ate_cm) : nlohmann::json(nullptr);
  return j;
}

/// One JSON object per line: every frame, then the summary.
inline std::string report_lines(const RunReport& r) {
  std::string s;
  for (const auto& f : r.frames) s += to_json(f).dump() + '\n';
  s += summary_json(r).dump() + '\n';
  return s;
}

inline std::string summary_table(const RunReport& r) {
  double track = 0.0, map = 0.0;
  for (const auto& f : r.frames) {
    track += f.track_ms;
    map += f.map_ms;
  }
  const double n = std::max<size_t>(1, r.frames.size());
  std::ostringstream o;
  char b[160];
  auto row = [&](const char* name, const std::string& v) {
    std::snprintf(b, sizeof b, "  %-24s %s\n", name, v.c_str());
    o << b;
  };
  auto f2 = [](double v) {
    char t[40];
    std::snprintf(t, sizeof t, "%.2f", v);
    return std::string(t);
  };
  row("frames", std::to_string(r.frames.size()));
  row("tracking lost", std::to_string(r.tracking_lost));
  row("track ms / frame", f2(track / n));
  row("map ms / frame", f2(map / n));
  row("gaussians added", std::to_string(r.added));
  row("gaussians removed", std::to_string(r.removed));
  row("gaussians live", std::to_string(r.live));
  row("keyframes", std::to_string(r.keyframes));
  row("ATE RMSE (cm)", r.ate_cm ? f2(*r.ate_cm) : std::string("n/a"));
  row("mean PSNR (dB)", f2(r.mean_psnr));
  row("depth ratio 1cm (%)", f2(r.mean_depth_ratio));
  row("seconds", f2(r.seconds));
  return o.str();
}

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

/// Frames in order; in prefetch mode the next frame loads while the
/// current one is processed.
class FrameFeed {
 public:
  FrameFeed(const SequenceSource& src, size_t count, bool prefetch) : src_(src), count_(count), prefetch_(prefetch) {}

  std::shared_ptr<const RGBDFrame> get(size_t i) {
    std::shared_ptr<const RGBDFrame> f;
    if (next_.valid() && next_index_ == i) {
      f = next_.get();
    } else {
      f = load(i);
    }
    if (prefetch_ && i + 1 < count_) {
      next_index_ = i + 1;
      next_ = std::async(std::launch::async, [this, j = i + 1] { return load(j); });
    }
    return f;
  }

 private:
  std::shared_ptr<const RGBDFrame> load(size_t i) const {
    auto f = std::make_shared<RGBDFrame>(load_frame(src_, i));
    f->depth = sanitize_depth(std::move(f->depth));
    return f;
  }

  const SequenceSource& src_;
  size_t count_;
  bool prefetch_;
  size_t next_index_ = 0;
  std::future<std::shared_ptr<const RGBDFrame>> next_;
};

}  // namespace detail

/// Ground-truth poses of a dataset: its ground-truth file when present,
/// otherwise the per-frame poses.
inline Trajectory ground_truth_of(const SequenceSource& src) {
  if (src.ground_truth) return *src.ground_truth;
  Trajectory t;
  for (const auto& f : src.frames)
    if (f.pose) t.push_back({f.timestamp, *f.pose});
  return t;
}

/// Runs tracking and mapping over the sequence. Writes trajectory.txt,
/// map.ply, report.jsonl and summary.txt into `out_dir` unless it is empty.
inline RunResult run_pipeline(const SequenceSource& src, const RunConfig& cfg, const std::string& out_dir = "") {
  cfg.validate();
  if (src.size() == 0) throw LoadError("dataset has no frames");
  const auto t_run = std::chrono::steady_clock::now();
  const CameraIntrinsics& k = src.intrinsics;
  const MappingConfig& mc = cfg.mapping;
  const size_t n = cfg.max_frames > 0 ? std::min<size_t>(src.size(), cfg.max_frames) : src.size();
  if (cfg.use_ground_truth_poses || cfg.init_from_ground_truth)
    for (size_t i = 0; i < n; ++i)
      if (!src.frames[i].pose) throw ConfigError("ground-truth poses requested but frame " + std::to_string(i) + " has none");

  RunResult res{RunReport{}, GaussianMap(mc.sh_degree), Trajectory{}, KeyframeStore{}};
  GaussianMap& map = res.map;
  RunReport& rep = res.report;
  rep.seed = cfg.seed;
  rep.config = config_values(cfg);
  Rng rng(cfg.seed);
  detail::FrameFeed feed(src, n, !cfg.serial);

  struct Pending {
    std::shared_ptr<const RGBDFrame> frame;
    Pose pose;
  };
  std::vector<Pending> window;
  Pose pose = Pose::identity();

  auto close_window = [&](FrameRecord& rec) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<WindowFrame> wf;
    for (const auto& p : window) wf.push_back({p.frame.get(), p.pose});
    const WindowSnapshot snap = capture_window(map);
    const OptimizeStats os = optimize_window(map, wf, k, mc, rng);
    fuse_window(map, snap);
    for (const auto& p : window) {
      const RenderBuffers r = render_forward(map, p.pose, k);
      const StateReport s = manage_states(map, r, *p.frame, mc, p.frame->frame_index);
      rec.states.error_increments += s.error_increments;
      rec.states.demoted += s.demoted;
      rec.states.promoted += s.promoted;
      rec.states.removed += s.removed;
    }
    const Pending& last = window.back();
    if (maybe_add_keyframe(last.pose, res.keyframes, last.frame->frame_index, last.frame, cfg.keyframes)) {
      rec.keyframe = true;
      if (cfg.global_optimization) rec.global_passes = global_optimize_step(map, res.keyframes, k, mc, rng).passes;
    }
    rec.window_end = true;
    rec.window_iterations = os.iterations;
    rec.window_ms = detail::ms_since(t0);
    window.clear();
  };

  for (size_t i = 0; i < n; ++i) {
    FrameRecord rec;
    auto frame = feed.get(i);
    rec.frame = static_cast<int>(i);
    rec.timestamp = frame->timestamp;

    const auto t_track = std::chrono::steady_clock::now();
    const DepthImage track_depth = cfg.bilateral_filter ? bilateral_filter(frame->depth) : frame->depth;
    if (cfg.use_ground_truth_poses) {
      pose = *src.frames[i].pose;
    } else if (i == 0) {
      pose = cfg.init_from_ground_truth ? *src.frames[0].pose : Pose::identity();
    } else {
      const auto pyr = build_pyramid(track_depth, k, cfg.icp.levels);
      const ModelView model = render_model_views(map, pose, k, cfg.icp.levels);
      IcpDiagnostics diag;
      try {
        pose = icp_track(pyr, model, pose, cfg.icp, &diag);
      } catch (const TrackingLost&) {
        if (cfg.strict_tracking) throw;
        rec.tracking_lost = true;
        ++rep.tracking_lost;
      }
      rec.icp_inliers = diag.inliers;
    }
    rec.track_ms = detail::ms_since(t_track);

    const auto t_map = std::chrono::steady_clock::now();
    const RenderBuffers rendered = render_forward(map, pose, k);
    const AddMasks masks = compute_add_masks(rendered, *frame, mc);
    const auto samples_s = sample_mask(masks.geometry, mc.sample_ratio, rng);
    const auto samples_c = sample_mask(masks.color, mc.sample_ratio, rng);
    const VertexNormalMaps world = transform_maps(vertex_normal_maps(frame->depth, k), pose);
    AddInputs in{&world, frame.get(), &rendered, &k, static_cast<int>(i)};
    rec.added = add_gaussians(map, samples_s, samples_c, in, mc);
    res.trajectory.push_back({frame->timestamp, pose});
    window.push_back({frame, pose});
    if (static_cast<int>(window.size()) == mc.window_size || i + 1 == n) close_window(rec);
    rec.map_ms = detail::ms_since(t_map);

    rec.live = map.live_count();
    rec.stable = map.stable_count();
    rec.unstable = map.unstable_count();
    rec.removed_total = map.total_removed();
    rep.frames.push_back(rec);
  }

  if (cfg.final_refinement) rep.refinement_passes = final_refinement(map, res.keyframes, k, mc, rng).passes;

  rep.added = map.total_added();
  rep.removed = map.total_removed();
  rep.live = map.live_count();
  rep.keyframes = res.keyframes.size();
  if (rep.added - rep.removed != rep.live) throw Error("internal: Gaussian counts do not reconcile");

  const Trajectory gt = ground_truth_of(src);
  if (gt.size() >= 3) {
    try {
      rep.ate_cm = ate_rmse(res.trajectory, gt);
    } catch (const EvaluationError&) {
    }
  }
  double psnr_sum = 0.0, ratio_sum = 0.0;
  size_t psnr_n = 0;
  for (size_t i = 0; i < n; ++i) {
    RGBDFrame f = load_frame(src, i);
    f.depth = sanitize_depth(std::move(f.depth));
    const RenderBuffers r = render_forward(map, res.trajectory[i].pose, k);
    const double p = psnr(r.color, f.color);
    if (std::isfinite(p)) {
      psnr_sum += p;
      ++psnr_n;
    }
    ratio_sum += depth_accuracy_ratio(r.depth, f.depth, 0.01);
  }
  rep.mean_psnr = psnr_n ? psnr_sum / static_cast<double>(psnr_n) : kPsnrIdentical;
  rep.mean_depth_ratio = ratio_sum / static_cast<double>(n);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_run).count();

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    export_trajectory(res.trajectory, (fs::path(out_dir) / "trajectory.txt").string());
    export_ply(map, (fs::path(out_dir) / "map.ply").string());
    std::ofstream(fs::path(out_dir) / "report.jsonl") << report_lines(rep);
    std::ofstream(fs::path(out_dir) / "summary.txt") << summary_table(rep);
    if (cfg.save_keyframe_renders) {
      fs::create_directories(fs::path(out_dir) / "keyframes");
      for (size_t j = 0; j < res.keyframes.size(); ++j) {
        const Keyframe& kf = res.keyframes[j];
        char name[32];
        std::snprintf(name, sizeof name, "%06d.png", kf.frame_index);
        png::write_color((fs::path(out_dir) / "keyframes" / name).string(),
                         render_forward(map, kf.pose, k).color);
      }
    }
  }
  return res;
}

}  // namespace discsplat
