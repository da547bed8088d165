#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "randt/metrics.hpp"
#include "randt/pipeline.hpp"
#include "randt/simulation.hpp"
#include "support/test_support.hpp"

using namespace randt;

namespace {

SyntheticWorld corridor(double duration) {
  std::ifstream is(std::string(RANDT_SOURCE_DIR) + "/data/worlds/indoor_loop.world");
  SyntheticWorld w = parse_world(is);
  w.robot.duration = duration;
  return w;
}

Trajectory run(const Dataset& d, bool deterministic, SlamConfig cfg = make_preset("indoor")) {
  SlamSession s(std::move(cfg), SessionOptions{deterministic});
  if (d.imu) s.add_imu(*d.imu);
  for (const auto& scan : d.scans) s.process_scan(scan);
  return s.finalize();
}

bool bit_identical(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].timestamp != b[i].timestamp || a[i].pose.x() != b[i].pose.x() || a[i].pose.y() != b[i].pose.y() ||
        a[i].pose.angle() != b[i].pose.angle()) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("stationary robot does not drift") {
  const SyntheticWorld w = test::square_room();
  const RadarScan base = simulate_scan(w, Pose2d::from_xyt(0.5, -0.5, 0.2), 0.0, 3);
  SlamSession s(make_preset("indoor"));
  std::vector<GyroSample> gyro;
  for (int i = 0; i <= 2000; ++i) gyro.push_back({i * 0.01, 0.0});
  s.add_imu(gyro);
  for (int i = 0; i < 100; ++i) {
    RadarScan scan = base;
    scan.timestamp = 0.2 * i;
    const ScanResult r = s.process_scan(scan);
    CHECK(r.status != ScanStatus::degraded);
  }
  for (const auto& e : s.raw_trajectory()) {
    CHECK(e.pose.translation().norm() < 0.01);
    CHECK(std::abs(e.pose.angle()) < 1e-3);
  }
  const Trajectory t = s.finalize();
  CHECK(t.size() == 100);
  CHECK(t.back().pose.translation().norm() < 0.01);
}

TEST_CASE("first scan bootstraps at identity") {
  const SyntheticWorld w = test::square_room();
  SlamSession s(make_preset("indoor"));
  const ScanResult r = s.process_scan(simulate_scan(w, Pose2d::from_xyt(2, 1, 0.5), 4.0, 1));
  CHECK(r.status == ScanStatus::bootstrap);
  CHECK(r.timestamp == 4.0);
  CHECK(r.global_pose.translation().norm() == 0.0);
  CHECK(r.global_pose.angle() == 0.0);
  REQUIRE(s.submap_count() == 1);
  CHECK(s.submap(0).root_pose.translation().norm() == 0.0);
  CHECK(s.submap(0).root_pose.angle() == 0.0);
  CHECK(s.graph().size() == 1);
  CHECK(s.graph().node(0).is_submap_root);
}

TEST_CASE("timestamps must increase") {
  const SyntheticWorld w = test::square_room();
  SlamSession s(make_preset("indoor"));
  const RadarScan scan = simulate_scan(w, Pose2d(), 1.0, 1);
  s.process_scan(scan);
  CHECK_THROWS_AS(s.process_scan(scan), InputError);
  RadarScan older = scan;
  older.timestamp = 0.5;
  CHECK_THROWS_AS(s.process_scan(older), InputError);
  CHECK(s.raw_trajectory().size() == 1);
}

TEST_CASE("empty scans fall back to prediction") {
  const SyntheticWorld w = test::square_room();
  SlamSession s(make_preset("indoor"));
  for (int i = 0; i < 5; ++i) s.process_scan(simulate_scan(w, Pose2d(), 0.2 * i, 1));
  const ScanResult r = s.process_scan(RadarScan{1.0, {}});
  CHECK(r.status == ScanStatus::degraded);
  CHECK(r.global_pose.translation().allFinite());
  CHECK(s.process_scan(simulate_scan(w, Pose2d(), 1.2, 1)).status == ScanStatus::ok);
  CHECK(s.finalize().size() == 7);
}

TEST_CASE("moving session is complete and deterministic") {
  const Dataset d = simulate(corridor(30.0), 2);
  const Trajectory a = run(d, true);
  const Trajectory b = run(d, true);
  REQUIRE(a.size() == d.scans.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].timestamp == d.scans[i].timestamp);
  CHECK(bit_identical(a, b));
  const double err = ate(a, *d.ground_truth);
  MESSAGE("30 s ATE " << err);
  CHECK(err < 0.5);

  // Background loop detection covers the same scans.
  const Trajectory c = run(d, false);
  CHECK(c.size() == a.size());
  CHECK(ate(c, *d.ground_truth) < 0.5);
}

TEST_CASE("keyframes and submaps follow the configured rules") {
  const Dataset d = simulate(corridor(30.0), 2);
  SlamConfig cfg = make_preset("indoor");
  SlamSession s(cfg);
  s.add_imu(*d.imu);
  for (const auto& scan : d.scans) s.process_scan(scan);
  s.finalize();
  const PoseGraph& g = s.graph();
  REQUIRE(g.size() > 2);
  int odometry = 0;
  for (const auto& c : g.constraints()) {
    if (c.kind == ConstraintKind::odometry) {
      CHECK(c.to == c.from + 1);
      ++odometry;
    }
  }
  CHECK(odometry == static_cast<int>(g.size()) - 1);
  for (std::size_t i = 1; i < g.size(); ++i) {
    const Pose2d step = g.node(static_cast<int>(i - 1)).pose.inverse() * g.node(static_cast<int>(i)).pose;
    CHECK(g.node(static_cast<int>(i)).traveled_distance >= g.node(static_cast<int>(i - 1)).traveled_distance);
    CHECK((step.translation().norm() > 0.3 || std::abs(step.angle()) > 5.0 * test::kPi / 180.0));
  }
  for (std::size_t k = 0; k < s.submap_count(); ++k) {
    int members = 0;
    for (const auto& n : g.nodes()) members += n.submap_id == static_cast<int>(k);
    CHECK(members <= cfg.keyframe.max_per_submap);
  }
  CHECK(s.submap_count() >= 2);
}
