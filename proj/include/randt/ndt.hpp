#pragma once

#include <Eigen/Core>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "randt/gaussian_mixture.hpp"
#include "randt/radar.hpp"
#include "randt/se2.hpp"

namespace randt {

struct CellIndex {
  std::int32_t x = 0;
  std::int32_t y = 0;
  auto operator<=>(const CellIndex&) const = default;
};

/// Centered sufficient statistics of a point set: count, mean and scatter
/// sum((p - mean)(p - mean)^T). Merging two sets is exact, so a cell updated
/// scan by scan matches the batch statistics of every point ever inserted.
struct CellStatistics {
  std::size_t count = 0;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();

  static CellStatistics from_points(std::span<const AugmentedPoint> points);

  void add(const AugmentedPoint& p);
  void merge(const CellStatistics& other);

  Eigen::Vector3d sum() const { return mean * static_cast<double>(count); }
  Eigen::Matrix3d outer_sum() const {
    return scatter + static_cast<double>(count) * mean * mean.transpose();
  }
};

struct NdtParams {
  double resolution = 0.5;  // cell edge length, m
  int min_points = 3;       // cells with fewer points are kept but not matched
  double eigen_floor = 1e-3;  // eigenvalues floored at this fraction of the largest spatial one
};

/// Intensity-augmented Gaussian over [x, y, p].
struct NdtCell {
  CellIndex index;
  CellStatistics stats;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();   // sample covariance, divisor n - 1
  Eigen::Matrix3d regularized = Eigen::Matrix3d::Zero();  // eigenvalue-floored, positive definite
  bool usable = false;

  std::size_t count() const { return stats.count; }
};

/// Recomputes mean, sample covariance, regularized covariance and the
/// usability flag from the cell's statistics.
void finalize_cell(NdtCell& cell, const NdtParams& params);

/// Floors the eigenvalues of an [x, y, p] covariance at `ratio` times the
/// largest eigenvalue of its spatial 2x2 block.
Eigen::Matrix3d regularize_covariance(const Eigen::Matrix3d& cov, double ratio);

/// Merges incoming statistics into a cell and refreshes its derived values.
NdtCell recursive_update(const NdtCell& cell, const CellStatistics& incoming, const NdtParams& params);

/// A cell expressed in another frame; intensity is left untouched.
NdtCell transformed(const NdtCell& cell, const Pose2d& pose);

class NdtGrid {
 public:
  using CellMap = std::map<CellIndex, NdtCell>;

  NdtGrid() = default;
  explicit NdtGrid(NdtParams params);

  const NdtParams& params() const { return params_; }
  double resolution() const { return params_.resolution; }

  CellIndex index_of(double x, double y) const;

  /// Routes points (already in the grid frame) into cells.
  void insert(std::span<const AugmentedPoint> points);
  /// Transforms geometric coordinates by `pose` before routing.
  void insert(std::span<const AugmentedPoint> points, const Pose2d& pose);

  const CellMap& cells() const { return cells_; }
  const NdtCell* find(const CellIndex& index) const;
  bool empty() const { return cells_.empty(); }
  std::size_t size() const { return cells_.size(); }
  std::size_t usable_count() const;
  std::vector<const NdtCell*> usable_cells() const;

  /// The k usable cells whose geometric mean is closest to `query` (x, y).
  /// Ties are broken by cell index. Searches rings of cells outward from the
  /// query cell and stops once no unvisited ring can hold a closer mean.
  std::vector<const NdtCell*> nearest(const Eigen::Vector2d& query, std::size_t k) const;

 private:
  void route(const CellIndex& idx, const CellStatistics& stats);

  NdtParams params_;
  CellMap cells_;
  CellIndex min_index_{0, 0};
  CellIndex max_index_{0, 0};
};

NdtGrid build_ndt(std::span<const AugmentedPoint> points, const NdtParams& params);

std::vector<const NdtCell*> nearest_distributions(const Eigen::Vector3d& query_mean, const NdtGrid& target,
                                                  std::size_t k);

/// Usable cells as an equally weighted mixture. Throws if none are usable.
GaussianMixture<3> cells_as_gmm(const NdtGrid& grid);

struct NdtSubmap {
  int id = 0;
  NdtGrid grid;
  Pose2d root_pose;  // global frame
  int root_node = -1;
  std::vector<int> keyframe_ids;
};

/// Inserts a scan whose pose in the submap root frame is `pose_in_root`.
void insert_scan(NdtSubmap& submap, std::span<const AugmentedPoint> points, const Pose2d& pose_in_root);

/// One cell per line: ix iy count mean(3) covariance upper triangle(6),
/// tab separated, 9 significant digits.
void write_grid_table(std::ostream& os, const NdtGrid& grid);

}  // namespace randt
