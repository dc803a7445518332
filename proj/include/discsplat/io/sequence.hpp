#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "discsplat/core/camera.hpp"
#include "discsplat/core/errors.hpp"
#include "discsplat/core/image.hpp"
#include "discsplat/io/png.hpp"
#include "discsplat/io/trajectory.hpp"

namespace discsplat {

namespace fs = std::filesystem;

inline constexpr double kAssociationMaxGap = 0.02;
inline constexpr double kTumDepthScale = 5000.0;
inline constexpr const char* kSyntheticManifest = "manifest.txt";
inline constexpr const char* kSyntheticMagic = "discsplat-synthetic";
inline constexpr int kSyntheticVersion = 1;

struct FrameDescriptor {
  double timestamp = 0.0;
  std::string color_path;
  std::string depth_path;
  std::optional<Pose> pose;
};

struct SequenceSource {
  std::string root;
  std::vector<FrameDescriptor> frames;
  CameraIntrinsics intrinsics;
  std::optional<Trajectory> ground_truth;
  size_t dropped = 0;

  size_t size() const { return frames.size(); }
};

inline RGBDFrame load_frame(const SequenceSource& src, size_t i) {
  const FrameDescriptor& fd = src.frames.at(i);
  RGBDFrame f;
  try {
    f.color = png::read_color(fd.color_path);
    f.depth = png::read_depth(fd.depth_path, src.intrinsics.depth_scale);
  } catch (const IoError& e) {
    throw LoadError("frame " + std::to_string(i) + ": " + e.what());
  }
  if (f.color.width != src.intrinsics.width || f.color.height != src.intrinsics.height ||
      !f.depth.same_shape(f.color))
    throw LoadError("frame " + std::to_string(i) + ": image size does not match intrinsics");
  f.frame_index = static_cast<int>(i);
  f.timestamp = fd.timestamp;
  return f;
}

namespace detail {

struct Listing {
  double t;
  std::string path;
};

inline std::vector<Listing> read_listing(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("missing listing " + file.string());
  std::vector<Listing> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Listing l;
    if (!(ss >> l.t >> l.path)) throw LoadError(file.string() + ":" + std::to_string(lineno) + ": malformed line");
    out.push_back(l);
  }
  return out;
}

inline std::string fmt17(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

}  // namespace detail

/// For each color stamp in order, the nearest unused depth stamp within the
/// gap; returns pairs of indices.
inline std::vector<std::pair<size_t, size_t>> associate_stamps(const std::vector<double>& a,
                                                               const std::vector<double>& b,
                                                               double max_gap = kAssociationMaxGap) {
  std::vector<std::pair<size_t, size_t>> out;
  std::vector<uint8_t> used(b.size(), 0);
  for (size_t i = 0; i < a.size(); ++i) {
    size_t best = b.size();
    double best_gap = max_gap;
    for (size_t j = 0; j < b.size(); ++j) {
      const double gap = std::abs(a[i] - b[j]);
      if (!used[j] && gap <= best_gap && (best == b.size() || gap < best_gap)) {
        best = j;
        best_gap = gap;
      }
    }
    if (best < b.size()) {
      used[best] = 1;
      out.emplace_back(i, best);
    }
  }
  return out;
}

/// TUM RGB-D layout: rgb.txt, depth.txt, optional groundtruth.txt and an
/// optional intrinsics.txt ("fx fy cx cy [width height]").
inline SequenceSource load_tum_sequence(const std::string& dir) {
  const fs::path root(dir);
  SequenceSource src;
  src.root = dir;
  src.intrinsics = {525.0, 525.0, 319.5, 239.5, 640, 480, kTumDepthScale};
  auto rgb = detail::read_listing(root / "rgb.txt");
  auto depth = detail::read_listing(root / "depth.txt");
  if (fs::exists(root / "intrinsics.txt")) {
    std::ifstream in(root / "intrinsics.txt");
    CameraIntrinsics& k = src.intrinsics;
    if (!(in >> k.fx >> k.fy >> k.cx >> k.cy)) throw LoadError("intrinsics.txt: expected 'fx fy cx cy'");
    int w, h;
    if (in >> w >> h) {
      k.width = w;
      k.height = h;
    }
  }
  std::vector<double> ta, tb;
  for (auto& l : rgb) ta.push_back(l.t);
  for (auto& l : depth) tb.push_back(l.t);
  auto pairs = associate_stamps(ta, tb);
  if (pairs.empty()) throw LoadError("no color/depth associations in " + dir);
  src.dropped = rgb.size() - pairs.size();
  for (auto [i, j] : pairs) {
    FrameDescriptor fd;
    fd.timestamp = rgb[i].t;
    fd.color_path = (root / rgb[i].path).string();
    fd.depth_path = (root / depth[j].path).string();
    if (!src.frames.empty() && fd.timestamp <= src.frames.back().timestamp)
      throw LoadError("timestamps must increase in " + dir);
    src.frames.push_back(fd);
  }
  if (fs::exists(root / "groundtruth.txt")) src.ground_truth = load_trajectory((root / "groundtruth.txt").string());
  src.intrinsics.validate();
  return src;
}

/// Line-oriented manifest, see docs/synthetic_format.md.
inline SequenceSource load_synthetic_sequence(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream in(root / kSyntheticManifest);
  if (!in) throw LoadError("missing " + (root / kSyntheticManifest).string());
  SequenceSource src;
  src.root = dir;
  Trajectory gt;
  bool have_k = false, have_scale = false;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw LoadError((root / kSyntheticManifest).string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (lineno == 1) {
      int version = 0;
      if (tag != kSyntheticMagic || !(ss >> version)) fail("not a synthetic manifest");
      if (version != kSyntheticVersion) fail("unsupported manifest version " + std::to_string(version));
      continue;
    }
    if (tag == "intrinsics") {
      CameraIntrinsics& k = src.intrinsics;
      if (!(ss >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height)) fail("bad intrinsics line");
      have_k = true;
    } else if (tag == "depth_scale") {
      if (!(ss >> src.intrinsics.depth_scale) || !(src.intrinsics.depth_scale > 0)) fail("bad depth_scale");
      have_scale = true;
    } else if (tag == "frame") {
      FrameDescriptor fd;
      std::string c, d;
      double tx, ty, tz, qx, qy, qz, qw;
      if (!(ss >> fd.timestamp >> c >> d >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) fail("bad frame line");
      fd.color_path = (root / c).string();
      fd.depth_path = (root / d).string();
      if (!fs::exists(fd.color_path)) fail("frame " + std::to_string(src.frames.size()) + ": missing " + c);
      if (!fs::exists(fd.depth_path)) fail("frame " + std::to_string(src.frames.size()) + ": missing " + d);
      fd.pose = Pose::from_quaternion(Quat(qw, qx, qy, qz).normalized(), Vec3(tx, ty, tz));
      if (!src.frames.empty() && fd.timestamp <= src.frames.back().timestamp) fail("timestamps must increase");
      gt.push_back({fd.timestamp, *fd.pose});
      src.frames.push_back(fd);
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  if (lineno == 0) throw LoadError("empty manifest in " + dir);
  if (!have_k || !have_scale) throw LoadError("manifest lacks intrinsics or depth_scale in " + dir);
  try {
    src.intrinsics.validate();
  } catch (const Error& e) {
    throw LoadError(std::string("manifest intrinsics: ") + e.what());
  }
  src.ground_truth = gt;
  return src;
}

/// Writes the manifest; frame files must be written by the caller.
inline void write_synthetic_manifest(const std::string& dir, const CameraIntrinsics& k,
                                     const std::vector<FrameDescriptor>& frames) {
  std::ofstream out(fs::path(dir) / kSyntheticManifest);
  if (!out) throw IoError("cannot write manifest in " + dir);
  using detail::fmt17;
  out << kSyntheticMagic << ' ' << kSyntheticVersion << '\n';
  out << "intrinsics " << fmt17(k.fx) << ' ' << fmt17(k.fy) << ' ' << fmt17(k.cx) << ' ' << fmt17(k.cy) << ' '
      << k.width << ' ' << k.height << '\n';
  out << "depth_scale " << fmt17(k.depth_scale) << '\n';
  for (const auto& f : frames) {
    const Pose p = f.pose.value_or(Pose::identity());
    const Quat q = p.quaternion();
    out << "frame " << fmt17(f.timestamp) << ' ' << f.color_path << ' ' << f.depth_path;
    for (double v : {p.translation.x(), p.translation.y(), p.translation.z(), q.x(), q.y(), q.z(), q.w()})
      out << ' ' << fmt17(v);
    out << '\n';
  }
}

/// Chooses the loader by the presence of a synthetic manifest.
inline SequenceSource load_sequence(const std::string& dir) {
  if (fs::exists(fs::path(dir) / kSyntheticManifest)) return load_synthetic_sequence(dir);
  return load_tum_sequence(dir);
}

}  // namespace discsplat
