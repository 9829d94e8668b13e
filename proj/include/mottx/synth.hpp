#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "mottx/detection.hpp"
#include "mottx/patch_source.hpp"
#include "mottx/tokenizer.hpp"

namespace mottx {

/// An interval during which one object is missing from the ground truth.
/// Frames [start, start + gap - 1] are empty for that identity.
struct GapWindow {
  int tid = 0;
  int start = 0;
  int gap = 1;
};

struct SceneConfig {
  int width = 640;
  int height = 360;
  int num_objects = 10;
  int num_frames = 200;
  double min_box_w = 24.0;
  double max_box_w = 48.0;
  double min_box_h = 48.0;
  double max_box_h = 96.0;
  double min_speed = 0.5;  // pixels per frame
  double max_speed = 3.0;
  /// 0 = fully distinct appearances, 1 = near-identical.
  double appearance_similarity = 0.5;
  /// Per-frame brightness jitter (std. dev. of a multiplicative gain).
  double brightness_jitter = 0.05;
  /// Per-value noise added to appearance vectors when frames are not rendered.
  double appearance_noise = 0.02;
  bool render = true;
  /// Object keeps moving while invisible.
  std::vector<GapWindow> occlusions;
  /// Object leaves and re-enters at a new position with a new velocity.
  std::vector<GapWindow> reentries;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Procedural look of one object, evaluated in box-local coordinates.
struct ObjectStyle {
  std::array<float, 3> upper{};
  std::array<float, 3> lower{};
  double stripe_u = 0.0;
  double stripe_v = 0.0;
  double phase = 0.0;
  double stripe_depth = 0.0;

  float value(double u, double v, int channel) const;
};

class Scene {
 public:
  const SceneConfig& config() const { return config_; }
  int num_frames() const { return config_.num_frames; }

  /// Ground-truth objects of a 1-based frame number, tid >= 1.
  const std::vector<Detection>& ground_truth(int frame) const { return gt_.at(static_cast<size_t>(frame - 1)); }
  const std::vector<std::vector<Detection>>& ground_truth() const { return gt_; }

  const std::vector<ObjectStyle>& styles() const { return styles_; }

  /// Renders frame `frame` (1-based). Objects are painted far-to-near by
  /// their bottom edge.
  FrameImage render(int frame) const;

  /// Canonical 12288-long appearance of an object (key = tid - 1), sampled
  /// on the 64x64 cell-center grid of its style.
  std::vector<float> base_appearance(int key) const;

  friend Scene generate(const SceneConfig& config);

 private:
  SceneConfig config_;
  std::vector<std::vector<Detection>> gt_;
  std::vector<ObjectStyle> styles_;
  FrameImage background_{1, 1};
};

/// Deterministic under config.seed. Throws std::invalid_argument on an
/// infeasible config.
Scene generate(const SceneConfig& config);

/// Appearance vectors used when frames are not rendered: each object's base
/// vector (or a clutter vector for negative keys) scaled by a per-frame gain
/// plus per-value noise, all derived from (seed, key, frame).
class AppearanceBank {
 public:
  AppearanceBank(std::vector<std::vector<float>> base, double brightness_jitter, double noise, std::uint64_t seed);
  explicit AppearanceBank(const Scene& scene);

  const std::vector<std::vector<float>>& base() const { return base_; }
  double brightness_jitter() const { return brightness_jitter_; }
  double noise() const { return noise_; }
  std::uint64_t seed() const { return seed_; }

  void appearance(int key, int frame, std::span<float> out) const;

 private:
  std::vector<std::vector<float>> base_;
  double brightness_jitter_;
  double noise_;
  std::uint64_t seed_;
};

/// Patch source backed by an AppearanceBank; detection column `x` holds the
/// appearance key.
class AppearancePatchSource : public PatchSource {
 public:
  AppearancePatchSource(AppearanceBank bank, int width, int height)
      : bank_(std::move(bank)), width_(width), height_(height) {}

  int frame_width() const override { return width_; }
  int frame_height() const override { return height_; }
  void patches(int frame, std::span<const Detection> dets, TensorF& out) const override;

 private:
  AppearanceBank bank_;
  int width_;
  int height_;
};

/// Patch source for a generated scene: renders frames when the scene is
/// configured to, otherwise uses its appearance vectors. A rendering source
/// refers to `scene`, which must outlive it.
std::unique_ptr<PatchSource> make_patch_source(const Scene& scene);

struct NoiseConfig {
  double box_sigma = 0.0;  // pixels, applied to cx, cy, w, h
  double fp_rate = 0.0;    // expected false positives per ground-truth object
  double fn_rate = 0.0;
  double conf_sigma = 0.0;  // true positives: conf = 1 - |N(0, conf_sigma)|
  double fp_conf_min = 0.1;
  double fp_conf_max = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Turns ground truth into detector-like output: jittered boxes, dropped
/// objects, spurious boxes, confidences, tid stripped to -1. Column `x`
/// carries the appearance key (object tid - 1, or a negative clutter key).
std::vector<std::vector<Detection>> corrupt(const std::vector<std::vector<Detection>>& gt, const NoiseConfig& noise,
                                            int width, int height);

}  // namespace mottx
