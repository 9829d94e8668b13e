#include "mottx/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mottx {

Eigen::MatrixXd similarity(const TensorD& past_embeddings, const TensorD& current_embeddings,
                           std::span<const BBox> past_boxes, std::span<const BBox> current_boxes,
                           std::span<const BBox> trajectory_last_boxes) {
  const auto rows = past_embeddings.rows();
  const auto cols = current_embeddings.rows();
  if (static_cast<Eigen::Index>(past_boxes.size()) != rows ||
      static_cast<Eigen::Index>(trajectory_last_boxes.size()) != rows ||
      static_cast<Eigen::Index>(current_boxes.size()) != cols) {
    throw std::invalid_argument("similarity: boxes do not align with embeddings");
  }
  if (rows == 0 || cols == 0) return Eigen::MatrixXd(rows, cols);
  if (past_embeddings.cols() != current_embeddings.cols()) {
    throw std::invalid_argument("similarity: embedding widths differ");
  }

  Eigen::MatrixXd s = past_embeddings * current_embeddings.transpose();
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      s(i, j) = s(i, j) * iou_scale(past_boxes[i], current_boxes[j]) + iou(trajectory_last_boxes[i], current_boxes[j]);
    }
  }
  return s;
}

Eigen::MatrixXd affinity(const Eigen::MatrixXd& similarity, std::span<const int> row_to_trajectory,
                         int num_trajectories) {
  if (static_cast<Eigen::Index>(row_to_trajectory.size()) != similarity.rows()) {
    throw std::invalid_argument("affinity: row map size differs from similarity rows");
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(num_trajectories, similarity.cols(),
                                                -std::numeric_limits<double>::infinity());
  std::vector<int> owned(static_cast<size_t>(std::max(num_trajectories, 0)), 0);
  for (Eigen::Index i = 0; i < similarity.rows(); ++i) {
    const int k = row_to_trajectory[static_cast<size_t>(i)];
    if (k < 0 || k >= num_trajectories) throw std::invalid_argument("affinity: row maps outside trajectories");
    ++owned[static_cast<size_t>(k)];
    a.row(k) = a.row(k).cwiseMax(similarity.row(i));
  }
  for (int k = 0; k < num_trajectories; ++k) {
    if (owned[static_cast<size_t>(k)] == 0) {
      throw std::invalid_argument("affinity: trajectory " + std::to_string(k) + " has no rows in the window");
    }
  }
  return a;
}

Eigen::MatrixXd weights(std::span<const BoxConfidence> trajectories, std::span<const BoxConfidence> detections,
                        double w_floor) {
  Eigen::MatrixXd w(static_cast<Eigen::Index>(trajectories.size()), static_cast<Eigen::Index>(detections.size()));
  for (size_t i = 0; i < trajectories.size(); ++i) {
    for (size_t j = 0; j < detections.size(); ++j) {
      const double h = std::max(hmiou(trajectories[i].box, detections[j].box), w_floor);
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = h * trajectories[i].conf * detections[j].conf;
    }
  }
  return w;
}

}  // namespace mottx
