#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "discsplat/eval/metrics.hpp"
#include "discsplat/mapping/adding.hpp"
#include "discsplat/mapping/masks.hpp"
#include "discsplat/mapping/optimizer.hpp"

namespace discsplat {

struct FitOptions {
  int gaussian_count = 1000;
  DepthMode mode = DepthMode::Compact;
  int iterations = 30;
  uint64_t seed = 0;
  double tau = 0.01;
  LearningRates lr;
  int sh_degree = 0;
};

struct FitReport {
  int gaussians = 0;
  int iterations = 0;
  double depth_ratio = 0.0;
  double psnr = 0.0;
  double seconds = 0.0;
  std::vector<double> losses;
  /// |D̂ - D| per pixel (-1 where the input depth is invalid, 10 where D̂ is missing).
  DepthImage depth_error;
  Image<double> color_error;
  RenderBuffers final_render;
};

/// Roughly uniform pixel sample: one random valid pixel per grid cell, then
/// random trimming or filling to exactly `count`.
inline std::vector<size_t> stratified_sample(const Mask& valid, int count, std::mt19937_64& rng) {
  std::vector<size_t> pool;
  for (size_t i = 0; i < valid.size(); ++i)
    if (valid[i]) pool.push_back(i);
  if (pool.size() < static_cast<size_t>(count)) throw InvalidInput("fit-frame: fewer valid pixels than Gaussians");
  const double cell = std::sqrt(static_cast<double>(pool.size()) / count);
  const int cw = std::max(1, static_cast<int>(std::ceil(valid.width / cell)));
  const int ch = std::max(1, static_cast<int>(std::ceil(valid.height / cell)));
  std::vector<std::vector<size_t>> cells(static_cast<size_t>(cw) * ch);
  for (size_t i : pool) {
    const int x = static_cast<int>(i % valid.width), y = static_cast<int>(i / valid.width);
    cells[static_cast<size_t>(std::min(ch - 1, static_cast<int>(y / cell))) * cw +
          std::min(cw - 1, static_cast<int>(x / cell))]
        .push_back(i);
  }
  std::vector<size_t> picked;
  std::vector<uint8_t> used(valid.size(), 0);
  for (auto& c : cells) {
    if (c.empty()) continue;
    std::uniform_int_distribution<size_t> d(0, c.size() - 1);
    const size_t i = c[d(rng)];
    picked.push_back(i);
    used[i] = 1;
  }
  std::shuffle(picked.begin(), picked.end(), rng);
  if (picked.size() > static_cast<size_t>(count)) picked.resize(count);
  std::vector<size_t> rest;
  for (size_t i : pool)
    if (!used[i]) rest.push_back(i);
  std::shuffle(rest.begin(), rest.end(), rng);
  for (size_t i = 0; picked.size() < static_cast<size_t>(count); ++i) picked.push_back(rest[i]);
  std::sort(picked.begin(), picked.end());
  return picked;
}

/// Initializes `gaussian_count` opaque discs from sampled pixels of a single
/// frame (identity pose) and optimizes them against it.
inline FitReport fit_frame(const RGBDFrame& frame, const CameraIntrinsics& k, const FitOptions& opt) {
  if (opt.gaussian_count < 1) throw InvalidParameter("fit-frame: Gaussian count must be >= 1");
  if (opt.iterations < 0) throw InvalidParameter("fit-frame: iterations must be >= 0");
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(opt.seed);
  const VertexNormalMaps vm = vertex_normal_maps(frame.depth, k);
  const auto samples = stratified_sample(vm.normal_valid, opt.gaussian_count, rng);

  GaussianMap seeds(opt.sh_degree);
  for (size_t pix : samples) {
    Gaussian g;
    g.position = vm.vertices[pix];
    seeds.add(g);
  }
  CenterGrid grid(seeds);
  GaussianMap map(opt.sh_degree);
  for (size_t j = 0; j < samples.size(); ++j) {
    const size_t pix = samples[j];
    Gaussian g;
    g.position = vm.vertices[pix];
    g.rotation = quaternion_aligning_z(vm.normals[pix]);
    auto nn = grid.nearest(g.position, 4);  // includes itself
    double ms = 0.0;
    int used = 0;
    for (const auto& [d, i] : nn)
      if (i != j) {
        ms += d * d;
        ++used;
      }
    double s = used ? std::sqrt(ms / used) : fallback_scale(frame.depth[pix], k).x();
    s = std::max(s, kMinInitScale);
    g.scale = Vec3(s, s, kDiscThicknessRatio * s);
    g.sh[0] = sh::dc_from_color(frame.color[pix]);
    g.set_anchor();
    map.add(g);
  }

  RenderOptions ro;
  ro.depth_mode = opt.mode;
  AdamOptimizer adam(map.slot_count(), map.sh_coeffs());
  PassSettings ps;
  ps.rates = StepRates::from(opt.lr);
  ps.unstable_only = false;
  ps.increment_confidence = false;
  ps.render = ro;
  FitReport rep;
  for (int it = 0; it < opt.iterations; ++it)
    rep.losses.push_back(optimization_pass(map, adam, frame, Pose::identity(), k, ps));

  rep.final_render = render_forward(map, Pose::identity(), k, ro);
  rep.gaussians = static_cast<int>(map.live_count());
  rep.iterations = opt.iterations;
  rep.depth_ratio = depth_accuracy_ratio(rep.final_render.depth, frame.depth, opt.tau);
  rep.psnr = psnr(rep.final_render.color, frame.color);
  rep.depth_error = DepthImage(k.width, k.height, -1.0);
  rep.color_error = Image<double>(k.width, k.height, 0.0);
  for (size_t i = 0; i < frame.depth.size(); ++i) {
    rep.color_error[i] = mean_abs_rgb(rep.final_render.color[i], frame.color[i]);
    if (!depth_is_valid(frame.depth[i])) continue;
    rep.depth_error[i] = rep.final_render.depth[i] == -1.0 ? 10.0 : std::abs(rep.final_render.depth[i] - frame.depth[i]);
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace discsplat
