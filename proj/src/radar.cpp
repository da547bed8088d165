#include "randt/radar.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace randt {

std::size_t RadarScan::return_count() const {
  std::size_t n = 0;
  for (const auto& beam : beams) n += beam.returns.size();
  return n;
}

ClusterSpan extract_cluster(std::span<const RadarReturn> returns, double cluster_gap) {
  // Seed: maximum intensity, ties resolved toward the smaller range.
  std::size_t seed = 0;
  for (std::size_t i = 1; i < returns.size(); ++i) {
    if (returns[i].intensity > returns[seed].intensity) seed = i;
  }
  ClusterSpan span{seed, seed};
  while (span.first > 0) {
    const auto& inner = returns[span.first];
    const auto& next = returns[span.first - 1];
    if (inner.range - next.range > cluster_gap || next.intensity > inner.intensity) break;
    --span.first;
  }
  while (span.last + 1 < returns.size()) {
    const auto& inner = returns[span.last];
    const auto& next = returns[span.last + 1];
    if (next.range - inner.range > cluster_gap || next.intensity > inner.intensity) break;
    ++span.last;
  }
  return span;
}

RadarScan filter_returns(const RadarScan& scan, const FilterConfig& cfg) {
  RadarScan out;
  out.timestamp = scan.timestamp;
  std::vector<RadarReturn> surviving;
  for (const auto& beam : scan.beams) {
    surviving.clear();
    for (const auto& r : beam.returns) {
      if (r.intensity < cfg.intensity_threshold) continue;
      if (r.range < cfg.min_range || r.range > cfg.max_range) continue;
      surviving.push_back(r);
    }
    if (surviving.empty()) continue;
    const ClusterSpan span = extract_cluster(surviving, cfg.cluster_gap);
    Beam kept;
    kept.azimuth = beam.azimuth;
    kept.returns.assign(surviving.begin() + static_cast<std::ptrdiff_t>(span.first),
                        surviving.begin() + static_cast<std::ptrdiff_t>(span.last) + 1);
    out.beams.push_back(std::move(kept));
  }
  return out;
}

PointCloud to_points(const RadarScan& scan) {
  PointCloud points;
  points.reserve(scan.return_count());
  for (const auto& beam : scan.beams) {
    const double c = std::cos(beam.azimuth);
    const double s = std::sin(beam.azimuth);
    for (const auto& r : beam.returns) {
      points.emplace_back(r.range * c, r.range * s, r.intensity);
    }
  }
  return points;
}

PointCloud filter_scan(const RadarScan& scan, const FilterConfig& cfg) {
  return to_points(filter_returns(scan, cfg));
}

namespace {

double rate_at(std::span<const GyroSample> s, std::size_t i, double t) {
  // Linear interpolation between samples i and i + 1.
  const double w = (t - s[i].timestamp) / (s[i + 1].timestamp - s[i].timestamp);
  return s[i].yaw_rate + w * (s[i + 1].yaw_rate - s[i].yaw_rate);
}

}  // namespace

ImuSegment integrate_gyro(std::span<const GyroSample> samples, double t0, double t1) {
  if (!(t1 > t0)) throw std::invalid_argument("integrate_gyro: t1 must exceed t0");
  const double dt = t1 - t0;
  const double max_gap = dt / 2.0;
  if (samples.empty()) throw MissingImuData("no gyro samples");

  auto before = [](const GyroSample& s, double t) { return s.timestamp < t; };
  // First sample at or after t0 and first sample after t1.
  const auto lo = std::lower_bound(samples.begin(), samples.end(), t0, before);
  const auto hi = std::upper_bound(samples.begin(), samples.end(), t1,
                                   [](double t, const GyroSample& s) { return t < s.timestamp; });

  // Samples bracketing the interval (may lie outside it).
  const std::size_t first = lo == samples.begin() ? 0 : static_cast<std::size_t>(lo - samples.begin()) - 1;
  const std::size_t last =
      hi == samples.end() ? samples.size() - 1 : static_cast<std::size_t>(hi - samples.begin());

  if (samples[first].timestamp - t0 > max_gap || t1 - samples[last].timestamp > max_gap) {
    throw MissingImuData("gyro samples do not cover [" + std::to_string(t0) + ", " + std::to_string(t1) + "]");
  }
  for (std::size_t i = first; i < last; ++i) {
    const double uncovered =
        std::min(samples[i + 1].timestamp, t1) - std::max(samples[i].timestamp, t0);
    if (uncovered > max_gap) throw MissingImuData("gyro gap of " + std::to_string(uncovered) + " s");
  }

  // Piecewise-linear rate over [t0, t1], integrated with the trapezoid rule.
  std::vector<std::pair<double, double>> knots;
  auto rate_clamped = [&](double t) {
    if (t <= samples.front().timestamp) return samples.front().yaw_rate;
    if (t >= samples.back().timestamp) return samples.back().yaw_rate;
    const auto it = std::upper_bound(samples.begin(), samples.end(), t,
                                     [](double v, const GyroSample& s) { return v < s.timestamp; });
    return rate_at(samples, static_cast<std::size_t>(it - samples.begin()) - 1, t);
  };
  knots.emplace_back(t0, rate_clamped(t0));
  for (auto it = lo; it != samples.end() && it->timestamp <= t1; ++it) {
    if (it->timestamp > t0 && it->timestamp < t1) knots.emplace_back(it->timestamp, it->yaw_rate);
  }
  knots.emplace_back(t1, rate_clamped(t1));

  double delta = 0.0;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    const double gap = knots[i].first - knots[i - 1].first;
    delta += 0.5 * gap * (knots[i].second + knots[i - 1].second);
  }
  return ImuSegment{delta, dt};
}

}  // namespace randt
