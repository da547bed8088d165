#include "randt/ndt.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace randt {

CellStatistics CellStatistics::from_points(std::span<const AugmentedPoint> points) {
  CellStatistics s;
  for (const auto& p : points) s.add(p);
  return s;
}

void CellStatistics::add(const AugmentedPoint& p) {
  ++count;
  const Eigen::Vector3d delta = p - mean;
  mean += delta / static_cast<double>(count);
  scatter += delta * (p - mean).transpose();
}

void CellStatistics::merge(const CellStatistics& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count);
  const double nb = static_cast<double>(other.count);
  const double n = na + nb;
  const Eigen::Vector3d delta = other.mean - mean;
  mean += delta * (nb / n);
  scatter += other.scatter + delta * delta.transpose() * (na * nb / n);
  count += other.count;
}

Eigen::Matrix3d regularize_covariance(const Eigen::Matrix3d& cov, double ratio) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Eigen::Vector3d ev = es.eigenvalues();
  // The floor follows the spatial spread only: intensity variance is orders
  // of magnitude larger and would otherwise blur thin wall cells into blobs.
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> spatial(cov.topLeftCorner<2, 2>(), Eigen::EigenvaluesOnly);
  // Absolute floor for fully degenerate cells (all points identical).
  const double floor = std::max(ratio * spatial.eigenvalues().maxCoeff(), 1e-9);
  ev = ev.cwiseMax(floor);
  const Eigen::Matrix3d& v = es.eigenvectors();
  Eigen::Matrix3d r = v * ev.asDiagonal() * v.transpose();
  return 0.5 * (r + r.transpose());
}

void finalize_cell(NdtCell& cell, const NdtParams& params) {
  const auto& s = cell.stats;
  cell.mean = s.mean;
  if (s.count >= 2) {
    cell.covariance = s.scatter / static_cast<double>(s.count - 1);
    cell.covariance = 0.5 * (cell.covariance + cell.covariance.transpose());
  } else {
    cell.covariance.setZero();
  }
  cell.usable = s.count >= static_cast<std::size_t>(std::max(params.min_points, 2));
  if (cell.usable) cell.regularized = regularize_covariance(cell.covariance, params.eigen_floor);
}

NdtCell recursive_update(const NdtCell& cell, const CellStatistics& incoming, const NdtParams& params) {
  NdtCell out = cell;
  if (incoming.count == 0) return out;
  out.stats.merge(incoming);
  finalize_cell(out, params);
  return out;
}

NdtCell transformed(const NdtCell& cell, const Pose2d& pose) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r.topLeftCorner<2, 2>() = pose.rotation();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  t.head<2>() = pose.translation();
  NdtCell out = cell;
  out.mean = r * cell.mean + t;
  out.covariance = r * cell.covariance * r.transpose();
  out.regularized = r * cell.regularized * r.transpose();
  out.stats.mean = r * cell.stats.mean + t;
  out.stats.scatter = r * cell.stats.scatter * r.transpose();
  return out;
}

NdtGrid::NdtGrid(NdtParams params) : params_(params) {
  if (!(params_.resolution > 0.0)) throw std::invalid_argument("NdtGrid: resolution must be positive");
}

CellIndex NdtGrid::index_of(double x, double y) const {
  return CellIndex{static_cast<std::int32_t>(std::floor(x / params_.resolution)),
                   static_cast<std::int32_t>(std::floor(y / params_.resolution))};
}

void NdtGrid::route(const CellIndex& idx, const CellStatistics& stats) {
  if (cells_.empty()) {
    min_index_ = max_index_ = idx;
  } else {
    min_index_ = {std::min(min_index_.x, idx.x), std::min(min_index_.y, idx.y)};
    max_index_ = {std::max(max_index_.x, idx.x), std::max(max_index_.y, idx.y)};
  }
  auto [it, inserted] = cells_.try_emplace(idx);
  if (inserted) it->second.index = idx;
  it->second = recursive_update(it->second, stats, params_);
}

void NdtGrid::insert(std::span<const AugmentedPoint> points) {
  // Accumulate per cell first so each cell is refreshed once per scan.
  std::map<CellIndex, CellStatistics> batch;
  for (const auto& p : points) batch[index_of(p.x(), p.y())].add(p);
  for (const auto& [idx, stats] : batch) route(idx, stats);
}

void NdtGrid::insert(std::span<const AugmentedPoint> points, const Pose2d& pose) {
  std::vector<AugmentedPoint> moved;
  moved.reserve(points.size());
  for (const auto& p : points) {
    const Eigen::Vector2d xy = pose * Eigen::Vector2d(p.head<2>());
    moved.emplace_back(xy.x(), xy.y(), p.z());
  }
  insert(moved);
}

const NdtCell* NdtGrid::find(const CellIndex& index) const {
  const auto it = cells_.find(index);
  return it == cells_.end() ? nullptr : &it->second;
}

std::size_t NdtGrid::usable_count() const {
  return static_cast<std::size_t>(
      std::count_if(cells_.begin(), cells_.end(), [](const auto& kv) { return kv.second.usable; }));
}

std::vector<const NdtCell*> NdtGrid::usable_cells() const {
  std::vector<const NdtCell*> out;
  out.reserve(cells_.size());
  for (const auto& [idx, cell] : cells_) {
    if (cell.usable) out.push_back(&cell);
  }
  return out;
}

std::vector<const NdtCell*> NdtGrid::nearest(const Eigen::Vector2d& query, std::size_t k) const {
  std::vector<const NdtCell*> result;
  if (k == 0 || cells_.empty()) return result;

  struct Candidate {
    double d2;
    const NdtCell* cell;
  };
  auto closer = [](const Candidate& a, const Candidate& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    return a.cell->index < b.cell->index;
  };
  std::vector<Candidate> found;

  const CellIndex c = index_of(query.x(), query.y());
  // Rings beyond this radius lie entirely outside the occupied bounding box.
  const std::int64_t max_ring = std::max<std::int64_t>(
      {std::abs(static_cast<std::int64_t>(c.x) - min_index_.x), std::abs(static_cast<std::int64_t>(c.x) - max_index_.x),
       std::abs(static_cast<std::int64_t>(c.y) - min_index_.y), std::abs(static_cast<std::int64_t>(c.y) - max_index_.y)});

  auto visit = [&](std::int64_t ix, std::int64_t iy) {
    if (ix < min_index_.x || ix > max_index_.x || iy < min_index_.y || iy > max_index_.y) return;
    const NdtCell* cell = find(CellIndex{static_cast<std::int32_t>(ix), static_cast<std::int32_t>(iy)});
    if (cell == nullptr || !cell->usable) return;
    found.push_back({(cell->mean.head<2>() - query).squaredNorm(), cell});
  };

  for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
    if (ring == 0) {
      visit(c.x, c.y);
    } else {
      for (std::int64_t d = -ring; d <= ring; ++d) {
        visit(c.x + d, c.y - ring);
        visit(c.x + d, c.y + ring);
      }
      for (std::int64_t d = -ring + 1; d <= ring - 1; ++d) {
        visit(c.x - ring, c.y + d);
        visit(c.x + ring, c.y + d);
      }
    }
    if (found.size() >= k) {
      std::nth_element(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(k - 1), found.end(), closer);
      // Every mean in ring + 1 or beyond is at least ring * resolution away.
      const double bound = static_cast<double>(ring) * params_.resolution;
      if (found[k - 1].d2 <= bound * bound) break;
    }
  }
  std::sort(found.begin(), found.end(), closer);
  if (found.size() > k) found.resize(k);
  result.reserve(found.size());
  for (const auto& f : found) result.push_back(f.cell);
  return result;
}

NdtGrid build_ndt(std::span<const AugmentedPoint> points, const NdtParams& params) {
  NdtGrid grid(params);
  grid.insert(points);
  return grid;
}

std::vector<const NdtCell*> nearest_distributions(const Eigen::Vector3d& query_mean, const NdtGrid& target,
                                                  std::size_t k) {
  if (k < 1) throw std::invalid_argument("nearest_distributions: k must be at least 1");
  return target.nearest(query_mean.head<2>(), k);
}

GaussianMixture<3> cells_as_gmm(const NdtGrid& grid) {
  const auto cells = grid.usable_cells();
  if (cells.empty()) throw std::invalid_argument("cells_as_gmm: grid has no usable cells");
  GaussianMixture<3> gmm;
  const double w = 1.0 / static_cast<double>(cells.size());
  for (const NdtCell* cell : cells) gmm.add(w, cell->mean, cell->regularized);
  return gmm;
}

void insert_scan(NdtSubmap& submap, std::span<const AugmentedPoint> points, const Pose2d& pose_in_root) {
  submap.grid.insert(points, pose_in_root);
}

void write_grid_table(std::ostream& os, const NdtGrid& grid) {
  char buf[64];
  auto field = [&](double v) {
    std::snprintf(buf, sizeof(buf), "\t%.9g", v);
    os << buf;
  };
  for (const auto& [idx, cell] : grid.cells()) {
    os << idx.x << '\t' << idx.y << '\t' << cell.count();
    for (int i = 0; i < 3; ++i) field(cell.mean(i));
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) field(cell.covariance(i, j));
    }
    os << '\n';
  }
}

}  // namespace randt
