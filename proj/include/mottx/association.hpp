#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "mottx/geometry.hpp"
#include "mottx/hungarian.hpp"
#include "mottx/tensor.hpp"

namespace mottx {

/// Object-level similarity between every past-window object (rows) and every
/// current detection (columns):
///
///   S = rowsoftmax(past * current^T) .* I_scale + I_position
///
/// I_scale compares each row object's own box with the detection by size
/// only; I_position is the plain IoU between the row's trajectory last box
/// and the detection. Inner products are not scaled.
Eigen::MatrixXd similarity(const TensorD& past_embeddings, const TensorD& current_embeddings,
                           std::span<const BBox> past_boxes, std::span<const BBox> current_boxes,
                           std::span<const BBox> trajectory_last_boxes);

/// Trajectory x detection affinity: max of S over each trajectory's rows.
/// Throws std::invalid_argument if a trajectory owns no rows.
Eigen::MatrixXd affinity(const Eigen::MatrixXd& similarity, std::span<const int> row_to_trajectory,
                         int num_trajectories);

struct BoxConfidence {
  BBox box;
  double conf = 1.0;
};

/// W[i][j] = max(hmiou(traj_i, det_j), w_floor) * conf(traj_i) * conf(det_j).
Eigen::MatrixXd weights(std::span<const BoxConfidence> trajectories, std::span<const BoxConfidence> detections,
                        double w_floor = 0.05);

}  // namespace mottx
