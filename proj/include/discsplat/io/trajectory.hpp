#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "discsplat/core/errors.hpp"
#include "discsplat/core/se3.hpp"

namespace discsplat {

struct TimedPose {
  double timestamp = 0.0;
  Pose pose;
};

using Trajectory = std::vector<TimedPose>;

/// "t tx ty tz qx qy qz qw" with nine significant digits per pose field.
inline std::string format_pose_line(const TimedPose& tp) {
  const Quat q = tp.pose.quaternion();
  auto num = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.9g", v == 0.0 ? 0.0 : v);
    return std::string(b);
  };
  char ts[40];
  std::snprintf(ts, sizeof ts, "%.6f", tp.timestamp);
  std::string s = ts;
  for (double v : {tp.pose.translation.x(), tp.pose.translation.y(), tp.pose.translation.z(), q.x(), q.y(), q.z(),
                   q.w()})
    s += " " + num(v);
  return s;
}

inline void export_trajectory(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory " + path);
  for (const auto& tp : traj) {
    if (!tp.pose.is_valid()) throw InvalidInput("export_trajectory: invalid pose");
    out << format_pose_line(tp) << '\n';
  }
  if (!out) throw IoError("failed writing trajectory " + path);
}

/// Parses TUM-style lines; '#' starts a comment line.
inline Trajectory parse_trajectory(std::istream& in, const std::string& name = "trajectory") {
  Trajectory traj;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw LoadError(name + ":" + std::to_string(lineno) + ": expected 't tx ty tz qx qy qz qw'");
    TimedPose tp;
    tp.timestamp = t;
    tp.pose = Pose::from_quaternion(Quat(qw, qx, qy, qz).normalized(), Vec3(tx, ty, tz));
    traj.push_back(tp);
  }
  return traj;
}

inline Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in || std::filesystem::is_directory(path)) throw LoadError("cannot open trajectory " + path);
  return parse_trajectory(in, path);
}

}  // namespace discsplat
