#include "hydroscen/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hydroscen/errors.hpp"

namespace hydroscen {
namespace {

struct Duals {
  std::vector<int> row_to_col;
  std::vector<double> u, v;  // row and column potentials
};

// Jonker-Volgenant style shortest augmenting path with potentials.
Duals hungarian(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Duals d;
  d.row_to_col.assign(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) d.row_to_col[p[j] - 1] = j - 1;
  d.u.assign(u.begin() + 1, u.end());
  d.v.assign(v.begin() + 1, v.end());
  return d;
}

// Lexicographically smallest perfect matching restricted to tight edges,
// starting from a known perfect matching `match` on those edges.
class TightMatcher {
public:
  TightMatcher(std::vector<std::vector<char>> tight, std::vector<int> match)
      : n_(static_cast<int>(match.size())), tight_(std::move(tight)), row_to_col_(std::move(match)),
        col_to_row_(n_, -1) {
    for (int i = 0; i < n_; ++i) col_to_row_[row_to_col_[i]] = i;
  }

  std::vector<int> solve() {
    fixed_cols_.assign(n_, 0);
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        if (!tight_[i][j] || fixed_cols_[j]) continue;
        if (row_to_col_[i] == j || reroute(i, j)) break;
      }
      fixed_cols_[row_to_col_[i]] = 1;
      first_free_row_ = i + 1;
    }
    return row_to_col_;
  }

private:
  // Try to give column j to row i: the row currently holding j must find
  // another column among unfixed rows, ending at i's current column.
  bool reroute(int i, int j) {
    const int target = row_to_col_[i];
    const int holder = col_to_row_[j];
    std::vector<char> seen(n_, 0);
    std::vector<int> path_col(n_, -1);
    if (!augment(holder, target, seen, path_col, j)) return false;
    row_to_col_[i] = j;
    col_to_row_[j] = i;
    return true;
  }

  // DFS alternating path from `row` to `target` avoiding `banned`.
  bool augment(int row, int target, std::vector<char>& seen, std::vector<int>& path_col, int banned) {
    for (int c = 0; c < n_; ++c) {
      if (!tight_[row][c] || fixed_cols_[c] || seen[c] || c == banned) continue;
      seen[c] = 1;
      if (c == target) {
        row_to_col_[row] = c;
        col_to_row_[c] = row;
        return true;
      }
      const int next = col_to_row_[c];
      if (next < first_free_row_) continue;
      if (augment(next, target, seen, path_col, banned)) {
        row_to_col_[row] = c;
        col_to_row_[c] = row;
        return true;
      }
    }
    return false;
  }

  int n_;
  std::vector<std::vector<char>> tight_;
  std::vector<int> row_to_col_;
  std::vector<int> col_to_row_;
  std::vector<char> fixed_cols_;
  int first_free_row_ = 0;
};

}  // namespace

double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& perm) {
  double total = 0.0;
  for (int i = 0; i < static_cast<int>(perm.size()); ++i) total += cost(i, perm[i]);
  return total;
}

bool is_permutation(const std::vector<int>& perm) {
  std::vector<char> seen(perm.size(), 0);
  for (int j : perm) {
    if (j < 0 || j >= static_cast<int>(perm.size()) || seen[j]) return false;
    seen[j] = 1;
  }
  return true;
}

Assignment assignment_solve(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw DataError("assignment_solve: cost matrix must be square");
  if (!cost.allFinite()) throw DataError("assignment_solve: cost matrix has non-finite entries");
  const int n = static_cast<int>(cost.rows());
  Assignment out;
  if (n == 0) return out;

  const Duals d = hungarian(cost);
  const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale * n;
  std::vector<std::vector<char>> tight(n, std::vector<char>(n, 0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) tight[i][j] = std::fabs(cost(i, j) - d.u[i] - d.v[j]) <= tol;
  for (int i = 0; i < n; ++i) tight[i][d.row_to_col[i]] = 1;

  std::vector<int> lex = TightMatcher(tight, d.row_to_col).solve();
  const double lex_total = assignment_cost(cost, lex);
  const double opt_total = assignment_cost(cost, d.row_to_col);
  // Tolerance-tight edges can admit a matching that is worse by rounding; never
  // trade optimality for ordering.
  if (lex_total <= opt_total) {
    out.perm = std::move(lex);
    out.total = lex_total;
  } else {
    out.perm = d.row_to_col;
    out.total = opt_total;
  }
  return out;
}

}  // namespace hydroscen
