#include "randt/pose_graph.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <cstdio>
#include <deque>
#include <ostream>
#include <sstream>

namespace randt {

namespace {

using Ad6 = Eigen::AutoDiffScalar<Eigen::Matrix<double, 6, 1>>;

std::string orphan_message(const std::vector<int>& orphans) {
  std::ostringstream os;
  os << "pose graph disconnected: node(s)";
  for (int id : orphans) os << ' ' << id;
  os << " unreachable from node 0";
  return os.str();
}

Pose2<Ad6> perturbed(const Pose2d& p, int offset) {
  Twist2<Ad6> d;
  for (int i = 0; i < 3; ++i) d(i) = Ad6(0.0, 6, offset + i);
  return Pose2<Ad6>(p.rotation().cast<Ad6>(), p.translation().cast<Ad6>()) * exp_map(d);
}

/// Pose-graph least squares with node 0 held fixed.
class GraphProblem {
 public:
  using Parameters = std::vector<Pose2d>;
  using Hessian = Eigen::SparseMatrix<double>;

  explicit GraphProblem(const PoseGraph& graph) : graph_(graph) {}

  double cost(const Parameters& x) const { return graph_.total_cost(x); }

  double linearize(const Parameters& x, Hessian& h, Eigen::VectorXd& g) const {
    const auto n = static_cast<Eigen::Index>(3 * (x.size() - 1));
    g.setZero(n);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(graph_.constraints().size() * 36);
    double total = 0.0;
    for (const auto& c : graph_.constraints()) {
      const Pose2d& a = x[static_cast<std::size_t>(c.from)];
      const Pose2d& b = x[static_cast<std::size_t>(c.to)];
      const Eigen::Vector3d e = constraint_error(c, a, b);
      total += e.dot(c.information * e);
      Eigen::Matrix3d ja;
      Eigen::Matrix3d jb;
      constraint_jacobians(c, a, b, ja, jb);
      const int ids[2] = {c.from, c.to};
      const Eigen::Matrix3d* js[2] = {&ja, &jb};
      for (int u = 0; u < 2; ++u) {
        if (ids[u] == 0) continue;
        const Eigen::Index ou = 3 * (ids[u] - 1);
        g.segment<3>(ou) += 2.0 * js[u]->transpose() * c.information * e;
        for (int v = 0; v < 2; ++v) {
          if (ids[v] == 0) continue;
          const Eigen::Index ov = 3 * (ids[v] - 1);
          const Eigen::Matrix3d block = 2.0 * js[u]->transpose() * c.information * *js[v];
          for (int r = 0; r < 3; ++r) {
            for (int col = 0; col < 3; ++col) triplets.emplace_back(ou + r, ov + col, block(r, col));
          }
        }
      }
    }
    h.resize(n, n);
    h.setFromTriplets(triplets.begin(), triplets.end());
    // Keep every diagonal entry present so damping can reach it.
    for (Eigen::Index i = 0; i < n; ++i) h.coeffRef(i, i) += 0.0;
    return total;
  }

  Parameters retract(const Parameters& x, const Eigen::VectorXd& dx) const {
    Parameters out = x;
    for (std::size_t i = 1; i < x.size(); ++i) {
      const Eigen::Vector3d d = dx.segment<3>(static_cast<Eigen::Index>(3 * (i - 1)));
      out[i] = (x[i] * exp_map<double>(d)).normalized();
    }
    return out;
  }

 private:
  const PoseGraph& graph_;
};

}  // namespace

DisconnectedGraph::DisconnectedGraph(std::vector<int> orphans)
    : std::runtime_error(orphan_message(orphans)), orphans_(std::move(orphans)) {}

Eigen::Vector3d constraint_error(const Constraint& c, const Pose2d& pose_a, const Pose2d& pose_b) {
  return log_map(c.relative.inverse() * (pose_a.inverse() * pose_b));
}

void constraint_jacobians(const Constraint& c, const Pose2d& pose_a, const Pose2d& pose_b, Eigen::Matrix3d& ja,
                          Eigen::Matrix3d& jb) {
  const Pose2<Ad6> a = perturbed(pose_a, 0);
  const Pose2<Ad6> b = perturbed(pose_b, 3);
  const Pose2<Ad6> z(c.relative.rotation().cast<Ad6>(), c.relative.translation().cast<Ad6>());
  const Twist2<Ad6> e = log_map(z.inverse() * (a.inverse() * b));
  for (int r = 0; r < 3; ++r) {
    Eigen::Matrix<double, 6, 1> d = Eigen::Matrix<double, 6, 1>::Zero();
    if (e(r).derivatives().size() == 6) d = e(r).derivatives();
    ja.row(r) = d.head<3>().transpose();
    jb.row(r) = d.tail<3>().transpose();
  }
}

int PoseGraph::add_node(KeyframeNode node) {
  node.id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(node));
  return nodes_.back().id;
}

void PoseGraph::add_constraint(const Constraint& c) {
  const int n = static_cast<int>(nodes_.size());
  if (c.from == c.to) throw std::invalid_argument("constraint endpoints must differ");
  if (c.from < 0 || c.from >= n || c.to < 0 || c.to >= n) throw std::out_of_range("constraint references unknown node");
  constraints_.push_back(c);
}

void PoseGraph::add_odometry_constraint(int from, int to, const Pose2d& relative) {
  add_constraint(Constraint{from, to, relative, cfg_.omega_od, ConstraintKind::odometry});
}

void PoseGraph::add_loop_constraint(int from, int to, const Pose2d& relative) {
  add_constraint(Constraint{from, to, relative, cfg_.omega_lo, ConstraintKind::loop});
}

std::vector<Pose2d> PoseGraph::poses() const {
  std::vector<Pose2d> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.pose);
  return out;
}

void PoseGraph::set_poses(const std::vector<Pose2d>& poses) {
  if (poses.size() != nodes_.size()) throw std::invalid_argument("set_poses: size mismatch");
  for (std::size_t i = 0; i < poses.size(); ++i) nodes_[i].pose = poses[i];
}

double PoseGraph::total_cost(const std::vector<Pose2d>& poses) const {
  double total = 0.0;
  for (const auto& c : constraints_) {
    const Eigen::Vector3d e =
        constraint_error(c, poses[static_cast<std::size_t>(c.from)], poses[static_cast<std::size_t>(c.to)]);
    total += e.dot(c.information * e);
  }
  return total;
}

double PoseGraph::total_cost() const { return total_cost(poses()); }

std::vector<int> PoseGraph::unreachable_nodes() const {
  std::vector<int> out;
  if (nodes_.empty()) return out;
  std::vector<std::vector<int>> adjacency(nodes_.size());
  for (const auto& c : constraints_) {
    adjacency[static_cast<std::size_t>(c.from)].push_back(c.to);
    adjacency[static_cast<std::size_t>(c.to)].push_back(c.from);
  }
  std::vector<bool> seen(nodes_.size(), false);
  std::deque<int> queue{0};
  seen[0] = true;
  while (!queue.empty()) {
    const int id = queue.front();
    queue.pop_front();
    for (int next : adjacency[static_cast<std::size_t>(id)]) {
      if (!seen[static_cast<std::size_t>(next)]) {
        seen[static_cast<std::size_t>(next)] = true;
        queue.push_back(next);
      }
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

LmSummary PoseGraph::optimize() {
  if (auto orphans = unreachable_nodes(); !orphans.empty()) throw DisconnectedGraph(std::move(orphans));
  if (nodes_.size() < 2) {
    LmSummary s;
    s.converged = true;
    s.initial_cost = s.final_cost = total_cost();
    s.cost_history.push_back(s.final_cost);
    return s;
  }
  GraphProblem problem(*this);
  std::vector<Pose2d> x = poses();
  const LmSummary summary = levenberg_marquardt(problem, x, cfg_.lm);
  // Node 0 is untouched by retract, so this keeps it bit-identical.
  set_poses(x);
  return summary;
}

void write_g2o(std::ostream& os, const PoseGraph& graph) {
  char buf[256];
  for (const auto& n : graph.nodes()) {
    std::snprintf(buf, sizeof(buf), "VERTEX_SE2 %d %.17g %.17g %.17g\n", n.id, n.pose.x(), n.pose.y(), n.pose.angle());
    os << buf;
  }
  for (const auto& c : graph.constraints()) {
    const auto& i = c.information;
    std::snprintf(buf, sizeof(buf), "EDGE_SE2 %d %d %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", c.from,
                  c.to, c.relative.x(), c.relative.y(), c.relative.angle(), i(0, 0), i(0, 1), i(0, 2), i(1, 1),
                  i(1, 2), i(2, 2));
    os << buf;
  }
}

}  // namespace randt
