#pragma once

#include <vector>

#include <Eigen/Core>

namespace offtrack {

// Minimum-cost assignment on a rectangular cost matrix (Hungarian method with
// potentials). Returns, for each row, the assigned column or -1 when there are
// more rows than columns. Every row is assigned when rows <= cols.
std::vector<int> solve_linear_assignment(const Eigen::MatrixXd& cost);

}  // namespace offtrack
