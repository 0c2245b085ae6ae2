#include "kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace offtrack {

KdTree::KdTree(const std::vector<Eigen::Vector3d>& points) : points_(points), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  split_dim_.assign(points_.size(), 0);
  build(0, order_.size(), 0);
}

void KdTree::build(std::size_t lo, std::size_t hi, int depth) {
  if (hi - lo <= 1) return;
  // Split on the axis of largest spread.
  Eigen::Vector3d mn = points_[order_[lo]];
  Eigen::Vector3d mx = mn;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    mn = mn.cwiseMin(points_[order_[i]]);
    mx = mx.cwiseMax(points_[order_[i]]);
  }
  int dim = 0;
  (mx - mn).maxCoeff(&dim);
  const std::size_t mid = lo + (hi - lo) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::size_t a, std::size_t b) {
                     const double va = points_[a][dim];
                     const double vb = points_[b][dim];
                     return va < vb || (va == vb && a < b);
                   });
  split_dim_[mid] = dim;
  build(lo, mid, depth + 1);
  build(mid + 1, hi, depth + 1);
}

void KdTree::search(std::size_t lo, std::size_t hi, int depth, const Eigen::Vector3d& q, Hit& best) const {
  if (lo >= hi) return;
  const std::size_t mid = lo + (hi - lo) / 2;
  const std::size_t idx = order_[mid];
  const double d2 = (points_[idx] - q).squaredNorm();
  if (d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index)) {
    best.squared_distance = d2;
    best.index = idx;
  }
  if (hi - lo == 1) return;
  const int dim = split_dim_[mid];
  const double diff = q[dim] - points_[idx][dim];
  const bool left_first = diff <= 0.0;
  if (left_first) {
    search(lo, mid, depth + 1, q, best);
    if (diff * diff <= best.squared_distance) search(mid + 1, hi, depth + 1, q, best);
  } else {
    search(mid + 1, hi, depth + 1, q, best);
    if (diff * diff <= best.squared_distance) search(lo, mid, depth + 1, q, best);
  }
}

KdTree::Hit KdTree::nearest(const Eigen::Vector3d& query) const {
  Hit best;
  search(0, order_.size(), 0, query, best);
  return best;
}

KdTree::Hit KdTree::nearest_within(const Eigen::Vector3d& query, double max_distance) const {
  Hit best;
  best.squared_distance = max_distance * max_distance;
  search(0, order_.size(), 0, query, best);
  if (!best.found()) best.squared_distance = std::numeric_limits<double>::infinity();
  return best;
}

}  // namespace offtrack
