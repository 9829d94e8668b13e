#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mottx/detection.hpp"
#include "mottx/model.hpp"
#include "mottx/objective.hpp"
#include "mottx/patch_source.hpp"

namespace mottx {

struct TrainConfig {
  int batch_size = 4;
  int epochs = 7;
  /// Clip length per epoch; the last entry repeats for later epochs.
  std::vector<int> clip_schedule{4, 8, 16, 32, 64, 128};
  int max_clip_length = 128;
  int clips_per_epoch = 64;
  double lr = 2e-4;
  double min_lr = 1e-6;
  double weight_decay = 5e-4;
  double grad_clip = 1.0;
  int accumulation = 32;  // batches per optimizer step
  int min_interval = 1;
  int max_interval = 10;
  // Detection-noise augmentation of training clips.
  double box_jitter = 0.0;  // pixels, std. dev. on cx, cy, w, h
  double drop_rate = 0.0;   // chance of removing each object
  double clutter_rate = 0.0;  // expected clutter boxes per object
  std::uint64_t seed = 0;

  void validate() const;
  int clip_length(int epoch) const;
};

/// One annotated training sequence. `frames[k]` holds the ground truth of
/// frame k + 1 (tid >= 0); `source` supplies the patches.
struct TrainingSequence {
  std::vector<std::vector<Detection>> frames;
  std::shared_ptr<const PatchSource> source;
};

/// Draws a clip of `length` frames spaced by a random interval in
/// [min_interval, max_interval] (shrunk when the sequence is too short), with
/// object order shuffled inside each frame. Clutter boxes get identities of
/// their own that never repeat, so they only act as negative columns.
TrainingSample<float> sample_clip(const TrainingSequence& seq, int length, const TrainConfig& config,
                                  std::mt19937_64& rng);

/// Cosine decay from `base` at step 0 to `floor` at step total - 1.
double cosine_lr(int step, int total, double base, double floor);

/// Scales `grads` so their global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_grad_norm(ModelParams<float>& grads, double max_norm);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

/// AdamW with bias-corrected moments and decoupled weight decay
/// (p <- p - lr * wd * p), applied to every parameter.
class AdamW {
 public:
  AdamW(const ModelParams<float>& like, const AdamWConfig& config);

  void step(ModelParams<float>& params, const ModelParams<float>& grads, double lr);
  int steps() const { return t_; }

 private:
  AdamWConfig config_;
  ModelParams<float> m_;
  ModelParams<float> v_;
  int t_ = 0;
};

struct TrainLogEntry {
  int epoch = 0;
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<TrainLogEntry> log;  // one entry per optimizer step
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  int steps = 0;
  bool diverged = false;
  std::string message;
};

using TrainCallback = std::function<void(const TrainLogEntry&)>;

/// Runs the full schedule from `init`. On a non-finite loss or update the
/// run stops and the result holds the last finite parameters with
/// `diverged` set. Deterministic for a fixed seed and thread count.
TrainResult train(const std::vector<TrainingSequence>& data, const ModelParams<float>& init,
                  const TrainConfig& config, int threads = 1, const TrainCallback& on_step = {},
                  const TrainCallback& on_epoch = {});

/// Thread count from MOTTX_THREADS, falling back to the hardware count.
int default_threads();

}  // namespace mottx
