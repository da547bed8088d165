#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include <Eigen/Geometry>

#include "randt/loop_closure.hpp"
#include "randt/simulation.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace randt;
using randt::test::grid_overlap;
using randt::test::random_mixture;

namespace {

KeyframeNode node(int id, int submap, double traveled, const Eigen::Vector2d& position, ScanContextDescriptor d) {
  KeyframeNode n;
  n.id = id;
  n.submap_id = submap;
  n.traveled_distance = traveled;
  n.pose = Pose2d::from_xyt(position.x(), position.y(), 0.0);
  n.descriptor = std::move(d);
  return n;
}

ScanContextDescriptor one_hot(int ring, int sector, const ScanContextParams& p) {
  ScanContextDescriptor d;
  d.data = Eigen::MatrixXd::Zero(p.rings, p.sectors);
  d.data(ring, sector) = 1.0;
  return d;
}

}  // namespace

TEST_CASE("make_descriptor examples") {
  const ScanContextParams params;
  const PointCloud empty;
  CHECK(make_descriptor(empty, params).data.isZero(0.0));
  CHECK(make_descriptor(empty, params).data.rows() == 20);
  CHECK(make_descriptor(empty, params).data.cols() == 60);

  const PointCloud one{AugmentedPoint(3.0, 1.0, 20.0)};
  const auto d = make_descriptor(one, params);
  CHECK(d.data.sum() == 1.0);
  const double theta = std::atan2(1.0, 3.0);
  CHECK(d.data(static_cast<int>(std::hypot(3.0, 1.0) * 20 / 16.0), static_cast<int>(theta * 60 / (2 * test::kPi))) == 1.0);

  const PointCloud far{AugmentedPoint(20.0, 0.0, 100.0)};
  CHECK(make_descriptor(far, params).data.isZero(0.0));
}

TEST_CASE("rotation by whole sectors shifts descriptor columns") {
  const ScanContextParams params;
  const double width = 2 * test::kPi / params.sectors;
  std::mt19937_64 rng(31);
  // Points kept off bin boundaries so rebinning is unambiguous.
  PointCloud pts;
  while (pts.size() < 500) {
    const double r = test::uniform(rng, 0.0, 16.0);
    const double t = test::uniform(rng, 0.0, 2 * test::kPi);
    const double fr = r * params.rings / params.max_range;
    const double ft = t / width;
    if (std::abs(fr - std::round(fr)) < 1e-3 || std::abs(ft - std::round(ft)) < 1e-3) continue;
    pts.emplace_back(r * std::cos(t), r * std::sin(t), test::uniform(rng, 10, 200));
  }
  const auto base = make_descriptor(pts, params);
  for (int k : {1, 7, 30, 59}) {
    const Eigen::Rotation2Dd rot(k * width);
    PointCloud rotated;
    for (const auto& p : pts) {
      const Eigen::Vector2d q = rot * Eigen::Vector2d(p.head<2>());
      rotated.emplace_back(q.x(), q.y(), p.z());
    }
    const auto d = make_descriptor(rotated, params);
    for (int j = 0; j < params.sectors; ++j) CHECK(d.data.col((j + k) % params.sectors).isApprox(base.data.col(j), 1e-12));
    CHECK(descriptor_distance(base, d) == 0.0);
  }
}

TEST_CASE("descriptor_distance examples") {
  const ScanContextParams params;
  std::mt19937_64 rng(32);
  ScanContextDescriptor a;
  a.data = Eigen::MatrixXd::Zero(20, 60);
  for (int i = 0; i < 200; ++i) a.data(static_cast<int>(rng() % 20), static_cast<int>(rng() % 60)) += test::uniform(rng, 0.5, 5);
  CHECK(descriptor_distance(a, a) == 0.0);

  ScanContextDescriptor shifted;
  shifted.data.resize(20, 60);
  for (int j = 0; j < 60; ++j) shifted.data.col((j + 13) % 60) = a.data.col(j);
  CHECK(descriptor_distance(a, shifted) == 0.0);
  CHECK(descriptor_distance(shifted, a) == 0.0);

  // Same column, disjoint ring support.
  CHECK(descriptor_distance(one_hot(2, 5, params), one_hot(9, 5, params)) == 1.0);
  // No jointly nonzero column under any shift cannot happen with single
  // columns, so an empty descriptor stands in for it.
  ScanContextDescriptor zero;
  zero.data = Eigen::MatrixXd::Zero(20, 60);
  CHECK(descriptor_distance(a, zero) == 1.0);

  ScanContextDescriptor wrong;
  wrong.data = Eigen::MatrixXd::Zero(10, 60);
  CHECK_THROWS_AS(descriptor_distance(a, wrong), std::invalid_argument);

  for (int trial = 0; trial < 50; ++trial) {
    ScanContextDescriptor b;
    b.data = Eigen::MatrixXd::Zero(20, 60);
    for (int i = 0; i < 100; ++i) b.data(static_cast<int>(rng() % 20), static_cast<int>(rng() % 60)) += 1.0;
    const double d = descriptor_distance(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(d == doctest::Approx(descriptor_distance(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("odometry_similarity examples") {
  CHECK(odometry_similarity(40.0, 40.0, 0.5) == 0.0);
  CHECK(odometry_similarity(40.0, 0.0, 0.5) == 0.5);
  CHECK(odometry_similarity(40.0, 100.0, 0.5) == 0.5);
  CHECK(odometry_similarity(40.0, 20.0, 0.5) == doctest::Approx(0.25));
  CHECK(odometry_similarity(0.0, 0.0, 0.5) == 0.0);
}

TEST_CASE("Cauchy-Schwarz divergence closed form") {
  SUBCASE("5 sigma apart") {
    GaussianMixture<2> p, q;
    p.add(1.0, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity());
    q.add(1.0, Eigen::Vector2d(5.0, 0.0), Eigen::Matrix2d::Identity());
    const double d = cauchy_schwarz_divergence(p, q);
    CHECK(d == doctest::Approx(6.25).epsilon(1e-12));
    const double pq = grid_overlap(p, q, 12.0, 0.02);
    const double pp = grid_overlap(p, p, 12.0, 0.02);
    const double qq = grid_overlap(q, q, 12.0, 0.02);
    const double numeric = -std::log(pq / std::sqrt(pp * qq));
    CHECK(std::abs(d - numeric) <= 1e-4 * numeric);
    CHECK(d > LoopClosureConfig{}.gate);
  }
  SUBCASE("random mixtures against grid integration") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 8; ++trial) {
      const auto p = random_mixture(rng, 3, 2.0);
      const auto q = random_mixture(rng, 3, 2.0);
      const double pq = grid_overlap(p, q, 10.0, 0.025);
      const double pp = grid_overlap(p, p, 10.0, 0.025);
      const double qq = grid_overlap(q, q, 10.0, 0.025);
      CHECK(std::abs(mixture_overlap(p, q) - pq) <= 1e-4 * pq);
      const double numeric = -std::log(pq / std::sqrt(pp * qq));
      const double d = cauchy_schwarz_divergence(p, q);
      CHECK(std::abs(d - numeric) <= 1e-4 * std::max(numeric, 1e-2));
    }
  }
  SUBCASE("symmetry, nonnegativity and identity") {
    std::mt19937_64 rng(34);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto p = random_mixture(rng, 4, 3.0);
      const auto q = random_mixture(rng, 4, 3.0);
      const double pq = cauchy_schwarz_divergence(p, q);
      CHECK(std::abs(pq - cauchy_schwarz_divergence(q, p)) < 1e-9);
      CHECK(pq >= -1e-9);
      CHECK(std::abs(cauchy_schwarz_divergence(p, p)) < 1e-9);
    }
  }
  SUBCASE("permutation invariance") {
    GaussianMixture<2> p, permuted;
    const Eigen::Matrix2d c = Eigen::Vector2d(0.5, 0.2).asDiagonal();
    p.add(0.5, Eigen::Vector2d(-1.0, 0.0), c);
    p.add(0.5, Eigen::Vector2d(1.0, 0.0), c);
    permuted.add(0.5, Eigen::Vector2d(1.0, 0.0), c);
    permuted.add(0.5, Eigen::Vector2d(-1.0, 0.0), c);
    CHECK(std::abs(cauchy_schwarz_divergence(p, permuted)) < 1e-12);
  }
  GaussianMixture<2> empty, one;
  one.add(1.0, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity());
  CHECK_THROWS_AS(cauchy_schwarz_divergence(empty, one), std::invalid_argument);
}

TEST_CASE("gate on a scan identical to the submap") {
  const SyntheticWorld w = test::square_room();
  const PointCloud pts = filter_scan(simulate_scan(w, Pose2d(), 0.0, 1), FilterConfig{});
  const NdtParams params{0.5};
  const NdtGrid map = build_ndt(pts, params);
  CHECK(std::abs(alignment_divergence(pts, Pose2d(), map)) < 1e-9);
  CHECK(std::abs(alignment_divergence(pts, Pose2d(), map, 0.0, 0.1)) < 1e-9);
  CHECK(alignment_divergence(pts, Pose2d::from_xyt(1.0, 0.5, 0.2), map, 0.0, 0.1) > 0.1);
  CHECK(std::isinf(alignment_divergence(pts, Pose2d(), NdtGrid(params))));

  LoopClosureConfig cfg;
  LoopCandidate cand;
  cand.separation = 50.0;
  const GateDecision ok = refine_and_gate(cand, map, pts, map, Pose2d(), EstimatorConfig{}, cfg);
  CHECK(ok.accepted);
  // Neighbor associations let the solver settle a hair off identity.
  CHECK(ok.candidate.divergence < 0.05);
  CHECK(ok.candidate.refined_transform.translation().norm() < 1e-3);

  const GateDecision empty = refine_and_gate(cand, map, pts, NdtGrid(params), Pose2d(), EstimatorConfig{}, cfg);
  CHECK_FALSE(empty.accepted);
  CHECK(empty.cause == "empty-submap");

  // A guess far outside what odometry could have drifted.
  LoopCandidate near = cand;
  near.separation = 0.0;
  cfg.drift_allowance = 0.1;
  const GateDecision far = refine_and_gate(near, map, pts, map, Pose2d::from_xyt(0.4, 0.0, 0.0), EstimatorConfig{}, cfg);
  CHECK_FALSE(far.accepted);
  CHECK(far.cause == "implausible-correction");
}

TEST_CASE("find_candidate scoring, exclusions and determinism") {
  const ScanContextParams p;
  const LoopClosureConfig cfg;
  const auto query = node(10, 3, 60.0, {0.0, 0.0}, one_hot(4, 4, p));
  std::vector<KeyframeNode> db{
      node(0, 0, 0.0, {0.5, 0.0}, one_hot(4, 9, p)),      // best: shifted match, d_od 0.5
      node(1, 0, 2.0, {60.0, 0.0}, one_hot(4, 4, p)),     // beyond the drift bound
      node(2, 1, 55.0, {0.0, 0.0}, one_hot(4, 4, p)),     // too close in traveled distance
      node(3, 3, 0.0, {0.0, 0.0}, one_hot(4, 4, p)),      // same submap as the query
      node(4, 1, 30.0, {0.0, 1.0}, one_hot(9, 4, p)),     // d_sc 1
      query,
  };
  const auto c = find_candidate(query, db, cfg);
  REQUIRE(c);
  CHECK(c->candidate_node == 0);
  CHECK(c->candidate_submap == 0);
  CHECK(c->d_sc < 1e-12);
  CHECK(c->d_od == doctest::Approx(0.5));
  CHECK(c->score == doctest::Approx(c->d_sc + c->d_od));
  CHECK(c->separation == 60.0);
  CHECK(drift_bound(cfg, 60.0) == doctest::Approx(4.0));

  for (int i = 0; i < 5; ++i) {
    const auto again = find_candidate(query, db, cfg);
    REQUIRE(again);
    CHECK(again->candidate_node == c->candidate_node);
    CHECK(again->score == c->score);
  }

  // Ties keep the lower id.
  std::vector<KeyframeNode> twins{node(7, 0, 0.0, {0, 0}, one_hot(1, 1, p)), node(8, 0, 0.0, {0, 0}, one_hot(1, 1, p))};
  CHECK(find_candidate(query, twins, cfg)->candidate_node == 7);

  const std::vector<KeyframeNode> none{db[1], db[2], db[3], query};
  CHECK_FALSE(find_candidate(query, none, cfg));
  CHECK_FALSE(find_candidate(query, {}, cfg));
}

TEST_CASE("loop event line") {
  LoopEvent e{12.5, 40, 3, 0.25, 0.5, 0.125, true, ""};
  CHECK(format_loop_event(e) == "12.500000 40 3 0.250000 0.500000 0.125000 accepted");
  e.accepted = false;
  e.cause = "divergence";
  CHECK(format_loop_event(e) == "12.500000 40 3 0.250000 0.500000 0.125000 rejected:divergence");
}
