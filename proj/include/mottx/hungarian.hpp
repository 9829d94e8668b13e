#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

namespace mottx {

/// Result of a one-to-one assignment between rows (trajectories) and
/// columns (detections). Matched pairs are sorted by row.
struct Assignment {
  std::vector<std::pair<int, int>> matches;
  std::vector<int> unmatched_rows;
  std::vector<int> unmatched_cols;
};

/// Maximum-total-score one-to-one assignment on a rectangular matrix.
/// Pairs scoring <= match_eps are demoted to unmatched on both sides.
/// Throws std::invalid_argument on non-finite entries.
Assignment hungarian_max(const Eigen::MatrixXd& score, double match_eps = 1e-9);

/// Sum of the matched scores, accumulated in row order.
double assignment_total(const Eigen::MatrixXd& score, const Assignment& assignment);

}  // namespace mottx
