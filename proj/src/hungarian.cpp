#include "mottx/hungarian.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace mottx {

namespace {

// Shortest augmenting path Hungarian method for an n x m cost matrix with
// n <= m (minimization). Returns the column assigned to each row.
// Rows are inserted in index order and columns scanned in index order with
// strict comparisons, so ties resolve toward lower indices.
std::vector<int> solve_min(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
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

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

Assignment hungarian_max(const Eigen::MatrixXd& score, double match_eps) {
  if (!score.allFinite()) throw std::invalid_argument("hungarian_max: non-finite score");
  const int rows = static_cast<int>(score.rows());
  const int cols = static_cast<int>(score.cols());
  Assignment out;

  std::vector<int> row_to_col(rows, -1);
  if (rows > 0 && cols > 0) {
    if (rows <= cols) {
      row_to_col = solve_min(-score);
    } else {
      const Eigen::MatrixXd transposed = -score.transpose();
      const std::vector<int> col_to_row = solve_min(transposed);
      for (int c = 0; c < cols; ++c) {
        if (col_to_row[c] >= 0) row_to_col[col_to_row[c]] = c;
      }
    }
  }

  std::vector<char> col_used(cols, 0);
  for (int r = 0; r < rows; ++r) {
    const int c = row_to_col[r];
    if (c >= 0 && score(r, c) > match_eps) {
      out.matches.emplace_back(r, c);
      col_used[c] = 1;
    } else {
      out.unmatched_rows.push_back(r);
    }
  }
  for (int c = 0; c < cols; ++c) {
    if (!col_used[c]) out.unmatched_cols.push_back(c);
  }
  return out;
}

double assignment_total(const Eigen::MatrixXd& score, const Assignment& assignment) {
  double total = 0.0;
  for (const auto& [r, c] : assignment.matches) total += score(r, c);
  return total;
}

}  // namespace mottx
