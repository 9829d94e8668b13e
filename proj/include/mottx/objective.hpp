#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mottx/model.hpp"
#include "mottx/targets.hpp"

namespace mottx {

/// One training clip: raw patch rows for every non-<bos> token, the token
/// layout (with <bos> at row 0) and its per-frame targets.
template <typename Scalar>
struct TrainingSample {
  Tensor<Scalar> raw;  // (n - 1) x 12288
  SequenceLayout layout;
  std::vector<FramePairTargets> targets;
};

struct LossOptions {
  DropoutPlan dropout;
  int threads = 1;
};

/// Batch loss (mean of clip losses) and its gradient for every parameter,
/// embedding included. `grads` is overwritten.
/// Throws NumericError when the loss is not finite.
template <typename Scalar>
Scalar loss_and_gradients(std::span<const TrainingSample<Scalar>> batch, const ModelParams<Scalar>& params,
                          ModelParams<Scalar>& grads, const LossOptions& options = {});

/// Batch loss only.
template <typename Scalar>
Scalar batch_loss(std::span<const TrainingSample<Scalar>> batch, const ModelParams<Scalar>& params);

struct GradCheckOptions {
  ModelConfig config;
  int frames = 2;
  int objects_per_frame = 3;
  std::uint64_t seed = 0;
  double step = 1e-4;
  double rel_tol = 1e-4;
  double min_grad = 1e-8;
  /// Combine steps h and h/2 to cancel the O(h^2) term of the central
  /// difference.
  bool richardson = false;
};

struct GradCheckReport {
  size_t checked = 0;
  size_t skipped = 0;  // |g| at or below min_grad
  size_t failures = 0;
  double max_rel_error = 0.0;
  std::string worst_param;
  double loss = 0.0;

  bool passed() const { return failures == 0 && checked > 0; }
};

/// Compares analytic gradients of a random clip against central finite
/// differences, in double precision, over every parameter entry.
GradCheckReport gradient_check(const GradCheckOptions& options);

}  // namespace mottx
