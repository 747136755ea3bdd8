#pragma once

#include <vector>

#include <Eigen/Core>

namespace hydroscen {

struct Assignment {
  /// Row i is matched to column perm[i].
  std::vector<int> perm;
  double total = 0.0;
};

/// Minimum-cost perfect matching of a square cost matrix (O(n^3) shortest
/// augmenting path). Among optimal permutations the lexicographically
/// smallest one is returned. Throws DataError on non-square or non-finite input.
Assignment assignment_solve(const Eigen::MatrixXd& cost);

/// Sum of cost(i, perm[i]) accumulated in row order.
double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& perm);

bool is_permutation(const std::vector<int>& perm);

}  // namespace hydroscen
