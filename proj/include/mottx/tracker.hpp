#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mottx/detection.hpp"
#include "mottx/model.hpp"
#include "mottx/patch_source.hpp"

namespace mottx {

enum class TrackState { Track, Lost, New };

const char* to_string(TrackState state);

struct Tracklet {
  int tid = 0;
  TrackState state = TrackState::New;
  std::vector<Detection> history;  // frame numbers strictly increasing, tid filled in

  const BBox& last_box() const { return history.back().box; }
  double last_conf() const { return history.back().conf; }
  int last_frame() const { return history.back().frame; }
};

struct TrackerConfig {
  double tau_det = 0.1;
  double tau_new = 0.6;
  int window_T = 30;  // window length in past frames, also the lost tolerance
  double match_eps = 1e-9;
  double w_floor = 0.05;

  void validate() const;
};

/// One past object held in the sliding window.
struct WindowEntry {
  int tid = 0;
  std::vector<float> token;  // embedded token, d_model values
  BBox box{0.5, 0.5, 1.0, 1.0};
  double conf = 1.0;
};

struct WindowFrame {
  int frame = 0;
  std::vector<WindowEntry> entries;  // sorted by tid
};

/// Online association for one video sequence. Frames must be stepped in
/// strictly increasing order. The parameters are shared read-only and must
/// outlive the tracker.
class Tracker {
 public:
  Tracker(const ModelParams<float>& params, const TrackerConfig& config, int frame_width, int frame_height);

  /// Associates the detections of `frame`, returning one tid per detection
  /// (-1 for detections that were discarded).
  std::vector<int> step(int frame, std::span<const Detection> dets, const PatchSource& source);
  std::vector<int> step(int frame, std::span<const Detection> dets, const FrameImage& image);

  /// Finished and active trajectories, sorted by tid. The tracker is left
  /// empty.
  std::vector<Tracklet> finish();

  const TrackerConfig& config() const { return config_; }
  const std::vector<Tracklet>& active() const { return active_; }
  const std::vector<Tracklet>& finished() const { return finished_; }
  const std::vector<WindowFrame>& window() const { return window_; }
  /// Token count of the most recent model input, <bos> included (0 if the
  /// model was not run).
  size_t last_sequence_length() const { return last_sequence_length_; }

 private:
  using PatchFn = std::function<void(std::span<const Detection>, TensorF&)>;
  std::vector<int> step_impl(int frame, std::span<const Detection> dets, const PatchFn& patches);

  const ModelParams<float>& params_;
  TrackerConfig config_;
  int width_;
  int height_;
  int first_frame_ = 0;
  int last_frame_ = 0;
  int next_tid_ = 1;
  std::vector<Tracklet> active_;
  std::vector<Tracklet> finished_;
  std::vector<WindowFrame> window_;
  size_t last_sequence_length_ = 0;
};

/// Flattens trajectories into per-frame lists (index = frame - 1) with the
/// trajectory tid on every detection.
std::vector<std::vector<Detection>> trajectories_to_frames(std::span<const Tracklet> trajectories);

}  // namespace mottx
