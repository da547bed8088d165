#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "randt/radar.hpp"
#include "randt/simulation.hpp"
#include "support/test_support.hpp"

using namespace randt;

namespace {

Beam make_beam(double azimuth, const std::vector<double>& ranges, const std::vector<double>& intensities) {
  Beam b;
  b.azimuth = azimuth;
  for (std::size_t i = 0; i < ranges.size(); ++i) b.returns.push_back({ranges[i], intensities[i]});
  return b;
}

RadarScan single_beam_scan(const std::vector<double>& intensities, double spacing = 0.1) {
  std::vector<double> ranges;
  for (std::size_t i = 0; i < intensities.size(); ++i) ranges.push_back(2.0 + spacing * static_cast<double>(i));
  RadarScan s;
  s.beams.push_back(make_beam(0.3, ranges, intensities));
  return s;
}

std::vector<double> kept_intensities(const RadarScan& filtered) {
  std::vector<double> out;
  for (const auto& b : filtered.beams)
    for (const auto& r : b.returns) out.push_back(r.intensity);
  return out;
}

// Membership decided independently per return: every step on the way from the
// seed to the return must satisfy both cluster rules.
std::vector<bool> oracle_cluster(const std::vector<RadarReturn>& surviving, double gap) {
  std::size_t seed = 0;
  for (std::size_t i = 1; i < surviving.size(); ++i)
    if (surviving[i].intensity > surviving[seed].intensity) seed = i;
  std::vector<bool> member(surviving.size(), false);
  for (std::size_t j = 0; j < surviving.size(); ++j) {
    bool ok = true;
    const int dir = j >= seed ? 1 : -1;
    for (std::size_t k = seed; k != j && ok; k += dir) {
      const auto& inner = surviving[k];
      const auto& outer = surviving[k + dir];
      ok = std::abs(outer.range - inner.range) <= gap && outer.intensity <= inner.intensity;
    }
    member[j] = ok;
  }
  return member;
}

}  // namespace

TEST_CASE("filter_scan examples") {
  FilterConfig cfg;
  cfg.intensity_threshold = 40.0;
  cfg.cluster_gap = 0.3;

  const RadarScan kept = filter_returns(single_beam_scan({10, 80, 90, 60, 50}), cfg);
  CHECK(kept_intensities(kept) == std::vector<double>{80, 90, 60, 50});

  CHECK(kept_intensities(filter_returns(single_beam_scan({90}), cfg)) == std::vector<double>{90});
  CHECK(filter_scan(single_beam_scan({10, 20, 30}), cfg).empty());
}

TEST_CASE("cluster growth stops at an intensity increase or a gap") {
  FilterConfig cfg;
  cfg.intensity_threshold = 40.0;
  cfg.cluster_gap = 0.3;
  // 70 after 60 rises away from the seed; 100 is the seed.
  CHECK(kept_intensities(filter_returns(single_beam_scan({50, 100, 60, 70, 45}), cfg)) ==
        std::vector<double>{50, 100, 60});
  // A large range gap splits the cluster.
  RadarScan s;
  s.beams.push_back(make_beam(0.0, {2.0, 2.1, 3.0}, {90, 80, 70}));
  CHECK(kept_intensities(filter_returns(s, cfg)) == std::vector<double>{90, 80});
  // Ties between maxima go to the smaller range.
  RadarScan t;
  t.beams.push_back(make_beam(0.0, {2.0, 5.0}, {90, 90}));
  const RadarScan kt = filter_returns(t, cfg);
  REQUIRE(kt.beams.size() == 1);
  CHECK(kt.beams[0].returns.size() == 1);
  CHECK(kt.beams[0].returns[0].range == 2.0);
}

TEST_CASE("range gates") {
  FilterConfig cfg;
  cfg.intensity_threshold = 0.0;
  cfg.min_range = 1.0;
  cfg.max_range = 3.0;
  RadarScan s;
  s.beams.push_back(make_beam(0.0, {0.5, 2.0, 3.5}, {100, 90, 100}));
  const RadarScan k = filter_returns(s, cfg);
  REQUIRE(k.beams.size() == 1);
  REQUIRE(k.beams[0].returns.size() == 1);
  CHECK(k.beams[0].returns[0].range == 2.0);
}

TEST_CASE("filter matches the exhaustive rule oracle on random beams") {
  std::mt19937_64 rng(11);
  FilterConfig cfg;
  cfg.intensity_threshold = 30.0;
  cfg.cluster_gap = 0.3;
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<double> ranges;
    std::vector<double> intensities;
    double r = 1.0;
    for (int i = 0; i < n; ++i) {
      r += test::uniform(rng, 0.05, 0.5);
      ranges.push_back(r);
      intensities.push_back(std::round(test::uniform(rng, 0.0, 100.0)));
    }
    RadarScan s;
    s.beams.push_back(make_beam(1.0, ranges, intensities));
    std::vector<RadarReturn> surviving;
    for (int i = 0; i < n; ++i)
      if (intensities[i] >= cfg.intensity_threshold) surviving.push_back({ranges[i], intensities[i]});
    std::vector<double> expected;
    if (!surviving.empty()) {
      const auto member = oracle_cluster(surviving, cfg.cluster_gap);
      for (std::size_t i = 0; i < surviving.size(); ++i)
        if (member[i]) expected.push_back(surviving[i].intensity);
    }
    CHECK(kept_intensities(filter_returns(s, cfg)) == expected);
  }
}

TEST_CASE("filter invariants on simulated scans") {
  SyntheticWorld w = test::square_room();
  w.sensor.range_sigma = 0.02;
  w.sensor.clutter_rate = 0.3;
  w.sensor.noise_returns = 5;
  for (auto& wall : w.walls) wall.sigma = 10.0;
  FilterConfig cfg;
  cfg.intensity_threshold = 30.0;
  for (int k = 0; k < 5; ++k) {
    const RadarScan raw = simulate_scan(w, Pose2d::from_xyt(0.5 * k, -0.3 * k, 0.2 * k), 0.0, 100 + k);
    const RadarScan once = filter_returns(raw, cfg);
    const RadarScan twice = filter_returns(once, cfg);
    REQUIRE(once.beams.size() == twice.beams.size());
    for (std::size_t b = 0; b < once.beams.size(); ++b) {
      const auto& rs = once.beams[b].returns;
      REQUIRE(rs.size() == twice.beams[b].returns.size());
      for (std::size_t i = 0; i < rs.size(); ++i) {
        CHECK(rs[i].range == twice.beams[b].returns[i].range);
        CHECK(rs[i].intensity == twice.beams[b].returns[i].intensity);
      }
      // Contiguity among survivors and the per-beam maximum.
      const auto& src = *std::find_if(raw.beams.begin(), raw.beams.end(),
                                      [&](const Beam& x) { return x.azimuth == once.beams[b].azimuth; });
      std::vector<RadarReturn> surviving;
      for (const auto& r : src.returns)
        if (r.intensity >= cfg.intensity_threshold && r.range >= cfg.min_range && r.range <= cfg.max_range)
          surviving.push_back(r);
      const auto first = std::find_if(surviving.begin(), surviving.end(),
                                      [&](const RadarReturn& x) { return x.range == rs.front().range; });
      REQUIRE(first != surviving.end());
      for (std::size_t i = 0; i < rs.size(); ++i) CHECK((first + i)->range == rs[i].range);
      double max_i = 0.0;
      for (const auto& r : surviving) max_i = std::max(max_i, r.intensity);
      std::size_t seed = 0;
      for (std::size_t i = 0; i < rs.size(); ++i)
        if (rs[i].intensity == max_i) {
          seed = i;
          break;
        }
      CHECK(rs[seed].intensity == max_i);
      for (std::size_t i = seed; i + 1 < rs.size(); ++i) CHECK(rs[i + 1].intensity <= rs[i].intensity);
      for (std::size_t i = seed; i > 0; --i) CHECK(rs[i - 1].intensity <= rs[i].intensity);
    }
    // Cartesian conversion preserves range.
    const PointCloud pts = to_points(once);
    std::size_t idx = 0;
    for (const auto& b : once.beams)
      for (const auto& r : b.returns) {
        CHECK(std::abs(pts[idx].head<2>().norm() - r.range) < 1e-9);
        CHECK(pts[idx].z() == r.intensity);
        ++idx;
      }
  }
}

TEST_CASE("dense scan reduction band") {
  SyntheticWorld w = test::square_room();
  w.sensor.beams = 400;
  w.sensor.noise_returns = 20;
  w.sensor.clutter_rate = 0.1;
  w.sensor.range_sigma = 0.02;
  for (auto& wall : w.walls) wall.sigma = 10.0;
  const RadarScan raw = simulate_scan(w, Pose2d::from_xyt(0.3, 0.2, 0.1), 0.0, 5);
  const PointCloud pts = filter_scan(raw, FilterConfig{});
  const double ratio = static_cast<double>(pts.size()) / static_cast<double>(raw.return_count());
  MESSAGE("input " << raw.return_count() << " output " << pts.size());
  CHECK(raw.return_count() > 8000);
  CHECK(ratio >= 0.05);
  CHECK(ratio <= 0.30);
}

TEST_CASE("integrate_gyro examples") {
  std::vector<GyroSample> zero;
  std::vector<GyroSample> constant;
  std::vector<GyroSample> ramp;
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.01 * i;
    zero.push_back({t, 0.0});
    constant.push_back({t, 0.5});
    ramp.push_back({t, t});
  }
  CHECK(integrate_gyro(zero, 0.0, 0.2).delta_rotation == 0.0);
  const ImuSegment c = integrate_gyro(constant, 0.3, 0.5);
  CHECK(c.delta_rotation == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(c.dt == doctest::Approx(0.2));

  // Trapezoid oracle at 10^4 subdivisions of the rate t.
  double oracle = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double a = static_cast<double>(i) / n;
    const double b = static_cast<double>(i + 1) / n;
    oracle += 0.5 * (a + b) * (b - a);
  }
  CHECK(std::abs(integrate_gyro(ramp, 0.0, 1.0).delta_rotation - oracle) < 1e-12);
  // Interval ends between samples are interpolated.
  CHECK(integrate_gyro(ramp, 0.005, 0.035).delta_rotation == doctest::Approx(0.5 * (0.035 * 0.035 - 0.005 * 0.005)));
}

TEST_CASE("integrate_gyro coverage errors") {
  std::vector<GyroSample> s{{0.0, 1.0}, {0.05, 1.0}, {0.1, 1.0}, {0.5, 1.0}, {0.6, 1.0}};
  CHECK(integrate_gyro(s, 0.0, 0.1).delta_rotation == doctest::Approx(0.1));
  CHECK_THROWS_AS(integrate_gyro(s, 0.05, 0.55), MissingImuData);  // 0.4 s gap > 0.25 s
  CHECK_THROWS_AS(integrate_gyro(s, 0.55, 1.0), MissingImuData);   // no data after 0.6
  CHECK_THROWS_AS(integrate_gyro({}, 0.0, 1.0), MissingImuData);
}
