#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <vector>

#include "randt/levenberg_marquardt.hpp"
#include "randt/radar.hpp"
#include "randt/scan_context.hpp"
#include "randt/se2.hpp"

namespace randt {

struct KeyframeNode {
  int id = -1;
  Pose2d pose;  // global frame
  double timestamp = 0.0;
  int submap_id = 0;
  bool is_submap_root = false;
  double traveled_distance = 0.0;
  ScanContextDescriptor descriptor;
  std::shared_ptr<const PointCloud> filtered_scan;  // sensor frame
};

enum class ConstraintKind { odometry, loop };

struct Constraint {
  int from = -1;
  int to = -1;
  Pose2d relative;  // measured between(from, to)
  Eigen::Matrix3d information = Eigen::Matrix3d::Identity();
  ConstraintKind kind = ConstraintKind::odometry;
};

struct PoseGraphConfig {
  Eigen::Matrix3d omega_od = Eigen::Vector3d(100.0, 100.0, 400.0).asDiagonal();
  Eigen::Matrix3d omega_lo = Eigen::Vector3d(25.0, 25.0, 100.0).asDiagonal();
  LmOptions lm{.max_iterations = 100};
};

class DisconnectedGraph : public std::runtime_error {
 public:
  DisconnectedGraph(std::vector<int> orphans);
  const std::vector<int>& orphans() const { return orphans_; }

 private:
  std::vector<int> orphans_;
};

/// e = Log(Z^-1 (Pa^-1 Pb)).
Eigen::Vector3d constraint_error(const Constraint& c, const Pose2d& pose_a, const Pose2d& pose_b);

/// Jacobians of constraint_error under right perturbations of pose_a and pose_b.
void constraint_jacobians(const Constraint& c, const Pose2d& pose_a, const Pose2d& pose_b, Eigen::Matrix3d& ja,
                          Eigen::Matrix3d& jb);

class PoseGraph {
 public:
  explicit PoseGraph(PoseGraphConfig cfg = {}) : cfg_(std::move(cfg)) {}

  /// Appends a node and assigns it the next id.
  int add_node(KeyframeNode node);
  void add_odometry_constraint(int from, int to, const Pose2d& relative);
  void add_loop_constraint(int from, int to, const Pose2d& relative);
  void add_constraint(const Constraint& c);

  const std::vector<KeyframeNode>& nodes() const { return nodes_; }
  const KeyframeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const PoseGraphConfig& config() const { return cfg_; }
  std::size_t size() const { return nodes_.size(); }

  std::vector<Pose2d> poses() const;
  void set_poses(const std::vector<Pose2d>& poses);

  double total_cost() const;
  double total_cost(const std::vector<Pose2d>& poses) const;

  /// Node ids not reachable from node 0 through any constraint.
  std::vector<int> unreachable_nodes() const;

  /// Sparse LM over every node but node 0. Throws DisconnectedGraph.
  LmSummary optimize();

 private:
  PoseGraphConfig cfg_;
  std::vector<KeyframeNode> nodes_;
  std::vector<Constraint> constraints_;
};

/// VERTEX_SE2 / EDGE_SE2 lines, information as its upper triangle.
void write_g2o(std::ostream& os, const PoseGraph& graph);

}  // namespace randt
