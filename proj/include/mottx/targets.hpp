#pragma once

#include <span>
#include <vector>

#include "mottx/tensor.hpp"

namespace mottx {

/// One object of one clip frame: its identity and its row in the token
/// sequence.
struct ClipObject {
  int tid = 0;
  int seq_index = 0;
};

/// Supervision for clip frame t >= 1. Each row pairs a source embedding from
/// an earlier frame with the column holding the same identity in frame t.
struct FramePairTargets {
  int frame = 0;
  std::vector<int> columns;      // sequence indices of every frame-t object
  std::vector<int> row_sources;  // sequence index of each row's embedding
  std::vector<int> row_targets;  // position in `columns` of each row's label

  size_t rows() const { return row_sources.size(); }
};

/// For every frame t >= 1, one row per identity of frame t that appeared in
/// some earlier frame, sourced from its most recent earlier appearance.
/// Identities that end at t-1 or start at t contribute no row.
std::vector<FramePairTargets> build_targets(const std::vector<std::vector<ClipObject>>& frames);

/// Mean over contributing frame pairs of the mean row cross-entropy of
/// softmax(Z_rows * Z_t^T). Returns 0 when no frame pair has rows.
template <typename Scalar>
Scalar clip_loss(const Tensor<Scalar>& embeddings, std::span<const FramePairTargets> targets);

/// Same value; additionally accumulates `weight * dLoss/dEmbeddings` into
/// `d_embeddings` (which must be pre-sized like `embeddings`).
template <typename Scalar>
Scalar clip_loss(const Tensor<Scalar>& embeddings, std::span<const FramePairTargets> targets,
                 Tensor<Scalar>& d_embeddings, Scalar weight);

}  // namespace mottx
