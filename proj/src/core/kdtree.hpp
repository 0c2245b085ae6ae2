#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace offtrack {

// Exact nearest-neighbor index over a fixed 3D point set. Ties resolve to the
// lowest point index so results are reproducible.
class KdTree {
 public:
  struct Hit {
    std::size_t index = std::numeric_limits<std::size_t>::max();
    double squared_distance = std::numeric_limits<double>::infinity();
    bool found() const { return index != std::numeric_limits<std::size_t>::max(); }
  };

  KdTree() = default;
  explicit KdTree(const std::vector<Eigen::Vector3d>& points);

  std::size_t size() const { return points_.size(); }

  Hit nearest(const Eigen::Vector3d& query) const;
  // Nearest neighbor no farther than `max_distance`; not found otherwise.
  Hit nearest_within(const Eigen::Vector3d& query, double max_distance) const;

 private:
  void build(std::size_t lo, std::size_t hi, int depth);
  void search(std::size_t lo, std::size_t hi, int depth, const Eigen::Vector3d& q, Hit& best) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::size_t> order_;
  std::vector<int> split_dim_;
};

}  // namespace offtrack
