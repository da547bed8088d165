#include "randt/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace randt {

void validate_trajectory(const Trajectory& traj) {
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (!(traj[i].timestamp > traj[i - 1].timestamp)) {
      throw std::invalid_argument("trajectory timestamps must strictly increase (entry " + std::to_string(i) + ")");
    }
  }
}

std::optional<Pose2d> pose_at(const Trajectory& traj, double t) {
  if (traj.empty() || t < traj.front().timestamp || t > traj.back().timestamp) return std::nullopt;
  const auto it = std::lower_bound(traj.begin(), traj.end(), t,
                                   [](const TrajectoryEntry& e, double v) { return e.timestamp < v; });
  if (it->timestamp == t) return it->pose;
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double s = (t - a.timestamp) / (b.timestamp - a.timestamp);
  return interpolate(a.pose, b.pose, s);
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_tum(std::ostream& os, const Trajectory& traj) {
  for (const auto& e : traj) {
    const double half = 0.5 * e.pose.angle();
    os << format_number(e.timestamp) << ' ' << format_number(e.pose.x()) << ' ' << format_number(e.pose.y())
       << " 0 0 0 " << format_number(std::sin(half)) << ' ' << format_number(std::cos(half)) << '\n';
  }
}

void write_tum(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_tum(os, traj);
}

Trajectory read_tum(std::istream& is, const std::string& source) {
  Trajectory traj;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double v[8];
    for (double& x : v) {
      if (!(ls >> x)) throw std::runtime_error(source + ":" + std::to_string(line_no) + ": malformed TUM row");
    }
    const double yaw = 2.0 * std::atan2(v[6], v[7]);
    traj.push_back({v[0], Pose2d(yaw, Eigen::Vector2d(v[1], v[2]))});
  }
  validate_trajectory(traj);
  return traj;
}

Trajectory read_tum(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read_tum(is, path.string());
}

}  // namespace randt
