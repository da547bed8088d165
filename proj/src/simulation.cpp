#include "randt/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace randt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Arc-length parameterized Catmull-Rom path.
class SplinePath {
 public:
  explicit SplinePath(const RobotModel& robot) : robot_(robot) {
    const auto& w = robot.waypoints;
    if (w.size() < 2) return;
    pts_ = w;
    if (robot.closed) pts_.push_back(w.front());
    const std::size_t segments = pts_.size() - 1;
    constexpr int kSteps = 400;
    table_.push_back({0.0, 0.0});
    Eigen::Vector2d prev = point(0.0);
    for (std::size_t s = 0; s < segments; ++s) {
      for (int k = 1; k <= kSteps; ++k) {
        const double u = static_cast<double>(s) + static_cast<double>(k) / kSteps;
        const Eigen::Vector2d p = point(u);
        table_.push_back({table_.back().first + (p - prev).norm(), u});
        prev = p;
      }
    }
  }

  bool moving() const { return !table_.empty() && robot_.speed > 0.0; }
  double length() const { return table_.empty() ? 0.0 : table_.back().first; }

  Pose2d pose(double t) const {
    if (!moving()) {
      const Eigen::Vector2d p = robot_.waypoints.empty() ? Eigen::Vector2d::Zero() : robot_.waypoints.front();
      return Pose2d(robot_.heading, p);
    }
    const double u = param_at(std::clamp(robot_.speed * t, 0.0, length()));
    const Eigen::Vector2d d = derivative(u);
    return Pose2d(std::atan2(d.y(), d.x()), point(u));
  }

 private:
  const Eigen::Vector2d& control(long i) const {
    const long n = static_cast<long>(pts_.size());
    if (robot_.closed) {
      // pts_ repeats the first waypoint at the end; wrap over the distinct ones.
      const long m = n - 1;
      return pts_[static_cast<std::size_t>(((i % m) + m) % m)];
    }
    return pts_[static_cast<std::size_t>(std::clamp(i, 0L, n - 1))];
  }

  void coefficients(double u, long& i, double& f) const {
    const long segments = static_cast<long>(pts_.size()) - 1;
    i = std::min(static_cast<long>(std::floor(u)), segments - 1);
    f = u - static_cast<double>(i);
  }

  Eigen::Vector2d point(double u) const {
    long i;
    double f;
    coefficients(u, i, f);
    const auto &p0 = control(i - 1), &p1 = control(i), &p2 = control(i + 1), &p3 = control(i + 2);
    const double f2 = f * f, f3 = f2 * f;
    return 0.5 * ((2.0 * p1) + (-p0 + p2) * f + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f2 +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * f3);
  }

  Eigen::Vector2d derivative(double u) const {
    long i;
    double f;
    coefficients(u, i, f);
    const auto &p0 = control(i - 1), &p1 = control(i), &p2 = control(i + 1), &p3 = control(i + 2);
    return 0.5 * ((-p0 + p2) + 2.0 * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f +
                  3.0 * (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * f * f);
  }

  double param_at(double s) const {
    const auto it = std::lower_bound(table_.begin(), table_.end(), s,
                                     [](const std::pair<double, double>& e, double v) { return e.first < v; });
    if (it == table_.begin()) return 0.0;
    if (it == table_.end()) return table_.back().second;
    const auto& a = *(it - 1);
    const auto& b = *it;
    const double w = b.first > a.first ? (s - a.first) / (b.first - a.first) : 0.0;
    return a.second + w * (b.second - a.second);
  }

  const RobotModel& robot_;
  std::vector<Eigen::Vector2d> pts_;
  std::vector<std::pair<double, double>> table_;  // (arc length, parameter)
};

double session_duration(const SyntheticWorld& world, const SplinePath& path) {
  if (world.robot.duration > 0.0) return world.robot.duration;
  if (path.moving()) return path.length() / world.robot.speed;
  throw std::invalid_argument("simulate: stationary robot needs robot.duration");
}

double unwrapped_yaw_rate(const SplinePath& path, double t) {
  constexpr double h = 1e-4;
  const double t0 = std::max(t - h, 0.0);
  const double t1 = t + h;
  return wrap_angle(path.pose(t1).angle() - path.pose(t0).angle()) / (t1 - t0);
}

void add_cluster(std::vector<RadarReturn>& out, double range, double peak, const SensorModel& s, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count_dist(3, 5);
  const int count = count_dist(rng);
  std::uniform_int_distribution<int> before_dist(0, count - 1);
  const int before = std::min(before_dist(rng), 2);
  for (int k = -before; k < count - before; ++k) {
    const double r = range + k * s.cluster_spacing;
    if (r < s.min_range || r > s.max_range) continue;
    out.push_back({r, peak * std::pow(0.8, std::abs(k))});
  }
}

}  // namespace

SyntheticWorld parse_world(std::istream& is, const std::string& source) {
  SyntheticWorld w;
  std::map<std::string, std::function<void(std::istringstream&)>> setters;
  auto num = [](double& target) {
    return [&target](std::istringstream& v) {
      if (!(v >> target)) throw std::invalid_argument("expected a number");
    };
  };
  auto integer = [](int& target) {
    return [&target](std::istringstream& v) {
      if (!(v >> target)) throw std::invalid_argument("expected an integer");
    };
  };
  setters["sensor.beams"] = integer(w.sensor.beams);
  setters["sensor.min_range"] = num(w.sensor.min_range);
  setters["sensor.max_range"] = num(w.sensor.max_range);
  setters["sensor.range_sigma"] = num(w.sensor.range_sigma);
  setters["sensor.clutter_rate"] = num(w.sensor.clutter_rate);
  setters["sensor.clutter_intensity"] = num(w.sensor.clutter_intensity);
  setters["sensor.cluster_spacing"] = num(w.sensor.cluster_spacing);
  setters["sensor.noise_returns"] = integer(w.sensor.noise_returns);
  setters["sensor.scan_rate"] = num(w.sensor.scan_rate);
  setters["imu.rate"] = num(w.imu.rate);
  setters["imu.bias"] = num(w.imu.bias);
  setters["imu.sigma"] = num(w.imu.sigma);
  setters["robot.speed"] = num(w.robot.speed);
  setters["robot.duration"] = num(w.robot.duration);
  setters["robot.heading"] = num(w.robot.heading);
  setters["robot.closed"] = [&w](std::istringstream& v) {
    std::string s;
    v >> s;
    if (s == "true" || s == "1") {
      w.robot.closed = true;
    } else if (s == "false" || s == "0") {
      w.robot.closed = false;
    } else {
      throw std::invalid_argument("expected true or false");
    }
  };
  setters["wall"] = [&w](std::istringstream& v) {
    Wall wall;
    if (!(v >> wall.a.x() >> wall.a.y() >> wall.b.x() >> wall.b.y() >> wall.reflectivity >> wall.sigma)) {
      throw std::invalid_argument("wall needs x1 y1 x2 y2 reflectivity sigma");
    }
    if (wall.reflectivity < 0.0 || wall.sigma < 0.0) throw std::invalid_argument("negative reflectivity or sigma");
    w.walls.push_back(wall);
  };
  setters["waypoint"] = [&w](std::istringstream& v) {
    Eigen::Vector2d p;
    if (!(v >> p.x() >> p.y())) throw std::invalid_argument("waypoint needs x y");
    w.robot.waypoints.push_back(p);
  };

  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    const auto blank = line.find_first_not_of(" \t\r");
    if (blank == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected key = value");
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    key.erase(0, key.find_first_not_of(" \t"));
    const auto it = setters.find(key);
    if (it == setters.end()) throw std::invalid_argument(where + "unknown key '" + key + "'");
    std::istringstream value(line.substr(eq + 1));
    try {
      it->second(value);
      std::string rest;
      if (value >> rest) throw std::invalid_argument("trailing characters");
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + key + ": " + e.what());
    }
  }
  if (w.sensor.clutter_rate < 0.0 || w.sensor.clutter_rate > 1.0) {
    throw std::invalid_argument(source + ": sensor.clutter_rate must lie in [0, 1]");
  }
  if (w.sensor.beams < 1 || !(w.sensor.scan_rate > 0.0) || !(w.imu.rate > 0.0)) {
    throw std::invalid_argument(source + ": beams, scan_rate and imu.rate must be positive");
  }
  return w;
}

SyntheticWorld load_world(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return parse_world(is, path.string());
}

Pose2d robot_pose(const SyntheticWorld& world, double t) { return SplinePath(world.robot).pose(t); }

std::pair<double, int> ray_cast(const std::vector<Wall>& walls, const Eigen::Vector2d& origin, double bearing,
                                double min_range, double max_range) {
  const Eigen::Vector2d d(std::cos(bearing), std::sin(bearing));
  double best = -1.0;
  int best_wall = -1;
  for (std::size_t i = 0; i < walls.size(); ++i) {
    const Eigen::Vector2d e = walls[i].b - walls[i].a;
    const double denom = d.x() * e.y() - d.y() * e.x();
    if (std::abs(denom) < 1e-12) continue;
    const Eigen::Vector2d w = walls[i].a - origin;
    const double t = (w.x() * e.y() - w.y() * e.x()) / denom;  // along the ray
    const double s = (w.x() * d.y() - w.y() * d.x()) / denom;  // along the wall
    if (s < 0.0 || s > 1.0 || t < min_range || t > max_range) continue;
    if (best < 0.0 || t < best) {
      best = t;
      best_wall = static_cast<int>(i);
    }
  }
  return {best, best_wall};
}

RadarScan simulate_scan(const SyntheticWorld& world, const Pose2d& pose, double timestamp, std::uint64_t seed,
                        SimulationStats* stats) {
  const SensorModel& s = world.sensor;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  RadarScan scan{timestamp, {}};
  scan.beams.reserve(static_cast<std::size_t>(s.beams));
  for (int j = 0; j < s.beams; ++j) {
    Beam beam{kTwoPi * j / s.beams, {}};
    const auto [range, wall] = ray_cast(world.walls, pose.translation(), pose.angle() + beam.azimuth, s.min_range,
                                        s.max_range);
    if (wall >= 0) {
      const Wall& w = world.walls[static_cast<std::size_t>(wall)];
      const double r = range + s.range_sigma * unit(rng);
      const double peak = std::max(0.0, w.reflectivity + w.sigma * unit(rng));
      add_cluster(beam.returns, r, peak, s, rng);
      if (stats) ++stats->wall_hits;
    }
    if (uniform(rng) < s.clutter_rate) {
      const double r = s.min_range + (s.max_range - s.min_range) * uniform(rng);
      beam.returns.push_back({r, s.clutter_intensity * (0.5 + uniform(rng))});
      if (stats) ++stats->clutter_returns;
    }
    for (int k = 0; k < s.noise_returns; ++k) {
      const double r = s.min_range + (s.max_range - s.min_range) * uniform(rng);
      beam.returns.push_back({r, 10.0 * uniform(rng)});
    }
    std::sort(beam.returns.begin(), beam.returns.end(),
              [](const RadarReturn& a, const RadarReturn& b) { return a.range < b.range; });
    // Ranges must strictly increase within a beam; keep the stronger duplicate.
    std::vector<RadarReturn> unique;
    for (const auto& r : beam.returns) {
      if (!unique.empty() && r.range <= unique.back().range) {
        if (r.intensity > unique.back().intensity) unique.back() = r;
      } else {
        unique.push_back(r);
      }
    }
    beam.returns = std::move(unique);
    if (stats) {
      ++stats->beams;
      stats->returns += beam.returns.size();
    }
    if (!beam.returns.empty()) scan.beams.push_back(std::move(beam));
  }
  return scan;
}

Dataset simulate(const SyntheticWorld& world, std::uint64_t seed, SimulationStats* stats) {
  const SplinePath path(world.robot);
  const double duration = session_duration(world, path);
  std::mt19937_64 rng(seed);
  Dataset data;
  data.imu.emplace();
  data.ground_truth.emplace();

  const Pose2d start = path.pose(0.0);
  const auto n_scans = static_cast<long>(std::floor(duration * world.sensor.scan_rate + 1e-9));
  for (long k = 0; k <= n_scans; ++k) {
    const double t = static_cast<double>(k) / world.sensor.scan_rate;
    const Pose2d pose = path.pose(t);
    data.scans.push_back(simulate_scan(world, pose, t, rng(), stats));
    data.ground_truth->push_back({t, (start.inverse() * pose).normalized()});
  }

  std::normal_distribution<double> unit(0.0, 1.0);
  const double end = static_cast<double>(n_scans) / world.sensor.scan_rate;
  const auto n_imu = static_cast<long>(std::ceil(end * world.imu.rate)) + 1;
  for (long k = 0; k <= n_imu; ++k) {
    const double t = static_cast<double>(k) / world.imu.rate;
    const double rate = path.moving() ? unwrapped_yaw_rate(path, t) : 0.0;
    data.imu->push_back({t, rate + world.imu.bias + world.imu.sigma * unit(rng)});
  }
  return data;
}

}  // namespace randt
