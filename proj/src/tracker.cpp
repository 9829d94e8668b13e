#include "mottx/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>

#include "mottx/association.hpp"
#include "mottx/errors.hpp"
#include "mottx/hungarian.hpp"

namespace mottx {

const char* to_string(TrackState state) {
  switch (state) {
    case TrackState::Track:
      return "Track";
    case TrackState::Lost:
      return "Lost";
    case TrackState::New:
      return "New";
  }
  return "?";
}

void TrackerConfig::validate() const {
  if (!(tau_det >= 0.0 && tau_det <= 1.0) || !(tau_new >= 0.0 && tau_new <= 1.0)) {
    throw std::invalid_argument("TrackerConfig: thresholds must be in [0,1]");
  }
  if (tau_new < tau_det) throw std::invalid_argument("TrackerConfig: tau_new must be >= tau_det");
  if (window_T < 1) throw std::invalid_argument("TrackerConfig: window_T must be >= 1");
  if (!(match_eps >= 0.0) || !(w_floor >= 0.0)) {
    throw std::invalid_argument("TrackerConfig: match_eps and w_floor must be >= 0");
  }
}

Tracker::Tracker(const ModelParams<float>& params, const TrackerConfig& config, int frame_width, int frame_height)
    : params_(params), config_(config), width_(frame_width), height_(frame_height) {
  config_.validate();
  if (width_ < 1 || height_ < 1) throw std::invalid_argument("Tracker: frame size must be positive");
  if (config_.window_T + 1 > params_.config.max_window) {
    throw std::invalid_argument("Tracker: window_T " + std::to_string(config_.window_T) +
                                " needs max_window >= " + std::to_string(config_.window_T + 1));
  }
}

std::vector<int> Tracker::step(int frame, std::span<const Detection> dets, const PatchSource& source) {
  return step_impl(frame, dets,
                   [&](std::span<const Detection> kept, TensorF& out) { source.patches(frame, kept, out); });
}

std::vector<int> Tracker::step(int frame, std::span<const Detection> dets, const FrameImage& image) {
  if (image.width() != width_ || image.height() != height_) {
    throw DataError("Tracker: frame " + std::to_string(frame) + " has the wrong image size");
  }
  return step_impl(frame, dets, [&](std::span<const Detection> kept, TensorF& out) { crop_patches(image, kept, out); });
}

std::vector<int> Tracker::step_impl(int frame, std::span<const Detection> dets, const PatchFn& patches) {
  if (last_frame_ != 0 && frame <= last_frame_) {
    throw DataError("Tracker: frame " + std::to_string(frame) + " does not follow frame " +
                    std::to_string(last_frame_));
  }
  if (frame < 1) throw DataError("Tracker: frame numbers start at 1");
  if (first_frame_ == 0) first_frame_ = frame;
  last_frame_ = frame;
  last_sequence_length_ = 0;

  std::vector<int> out(dets.size(), kUnassigned);
  std::vector<Detection> kept;
  std::vector<size_t> kept_index;
  for (size_t i = 0; i < dets.size(); ++i) {
    const BBox& b = dets[i].box;
    if (b.right() <= 0.0 || b.left() >= width_ || b.bottom() <= 0.0 || b.top() >= height_) {
      throw DataError("Tracker: detection " + std::to_string(i) + " of frame " + std::to_string(frame) +
                      " lies outside the image");
    }
    if (dets[i].conf >= config_.tau_det) {
      kept.push_back(dets[i]);
      kept.back().frame = frame;
      kept_index.push_back(i);
    }
  }
  const auto m = static_cast<Eigen::Index>(kept.size());

  const int T = config_.window_T;
  const int start = std::max(frame - T, first_frame_);
  std::erase_if(window_, [start](const WindowFrame& w) { return w.frame < start; });

  // Tracklets whose last token left the window can no longer match.
  for (auto it = active_.begin(); it != active_.end();) {
    if (it->last_frame() < start) {
      finished_.push_back(std::move(*it));
      it = active_.erase(it);
    } else {
      ++it;
    }
  }

  TensorF raw;
  TensorF current_tokens(0, params_.config.d_model);
  if (m > 0) {
    patches(kept, raw);
    current_tokens = embed(raw, params_.embed_w, params_.embed_b);
  }

  std::unordered_map<int, int> traj_of_tid;
  for (size_t k = 0; k < active_.size(); ++k) traj_of_tid[active_[k].tid] = static_cast<int>(k);

  Assignment assignment;
  if (m > 0 && !active_.empty()) {
    const int d = params_.config.d_model;
    size_t past = 0;
    for (const WindowFrame& w : window_) past += w.entries.size();
    const size_t n = 1 + past + kept.size();

    TokenSequence<float> seq;
    seq.tokens = TensorF::Zero(static_cast<Eigen::Index>(n), d);
    seq.layout = SequenceLayout::with_bos();
    std::vector<int> rows_seq;
    std::vector<int> row_traj;
    std::vector<BBox> row_boxes;
    std::vector<BBox> row_last;
    Eigen::Index r = 1;
    for (const WindowFrame& w : window_) {
      for (const WindowEntry& e : w.entries) {
        seq.tokens.row(r) = Eigen::Map<const Eigen::RowVectorXf>(e.token.data(), d);
        seq.layout.push(w.frame - start, normalize_box(e.box, width_, height_), e.tid);
        if (auto it = traj_of_tid.find(e.tid); it != traj_of_tid.end()) {
          rows_seq.push_back(static_cast<int>(r));
          row_traj.push_back(it->second);
          row_boxes.push_back(e.box);
          row_last.push_back(active_[static_cast<size_t>(it->second)].last_box());
        }
        ++r;
      }
    }
    std::vector<BBox> cur_boxes;
    std::vector<BoxConfidence> det_bc;
    for (Eigen::Index j = 0; j < m; ++j) {
      const Detection& det = kept[static_cast<size_t>(j)];
      seq.tokens.row(r++) = current_tokens.row(j);
      seq.layout.push(frame - start, normalize_box(det.box, width_, height_), kUnassigned);
      cur_boxes.push_back(det.box);
      det_bc.push_back({det.box, det.conf});
    }
    last_sequence_length_ = n;

    const TensorF z = forward(params_, seq);
    TensorD past_z(static_cast<Eigen::Index>(rows_seq.size()), d);
    for (size_t i = 0; i < rows_seq.size(); ++i) past_z.row(static_cast<Eigen::Index>(i)) = z.row(rows_seq[i]).cast<double>();
    const TensorD cur_z = z.bottomRows(m).cast<double>();

    const Eigen::MatrixXd s = similarity(past_z, cur_z, row_boxes, cur_boxes, row_last);
    const Eigen::MatrixXd a = affinity(s, row_traj, static_cast<int>(active_.size()));
    std::vector<BoxConfidence> traj_bc;
    for (const Tracklet& t : active_) traj_bc.push_back({t.last_box(), t.last_conf()});
    const Eigen::MatrixXd w = weights(traj_bc, det_bc, config_.w_floor);
    const Eigen::MatrixXd score = a.cwiseProduct(w);
    if (!score.allFinite()) throw NumericError("Tracker: non-finite association scores at frame " + std::to_string(frame));
    assignment = hungarian_max(score, config_.match_eps);
  } else {
    for (size_t k = 0; k < active_.size(); ++k) assignment.unmatched_rows.push_back(static_cast<int>(k));
    for (Eigen::Index j = 0; j < m; ++j) assignment.unmatched_cols.push_back(static_cast<int>(j));
  }

  WindowFrame current{frame, {}};
  auto add_entry = [&](int tid, Eigen::Index j) {
    const Detection& det = kept[static_cast<size_t>(j)];
    WindowEntry e{tid, std::vector<float>(current_tokens.row(j).data(), current_tokens.row(j).data() + current_tokens.cols()),
                  det.box, det.conf};
    current.entries.push_back(std::move(e));
    out[kept_index[static_cast<size_t>(j)]] = tid;
  };

  for (const auto& [row, col] : assignment.matches) {
    Tracklet& t = active_[static_cast<size_t>(row)];
    Detection det = kept[static_cast<size_t>(col)];
    det.tid = t.tid;
    t.history.push_back(det);
    t.state = TrackState::Track;
    add_entry(t.tid, col);
  }

  std::vector<bool> retire(active_.size(), false);
  for (int row : assignment.unmatched_rows) {
    Tracklet& t = active_[static_cast<size_t>(row)];
    if (frame - t.last_frame() > T || t.state == TrackState::New) {
      retire[static_cast<size_t>(row)] = true;
    } else {
      t.state = TrackState::Lost;
    }
  }
  std::vector<Tracklet> still;
  for (size_t k = 0; k < active_.size(); ++k) {
    (retire[k] ? finished_ : still).push_back(std::move(active_[k]));
  }
  active_ = std::move(still);

  // Newborn ids are handed out in a canonical order so that the result does
  // not depend on the order of the input detections.
  std::vector<int> born;
  for (int col : assignment.unmatched_cols) {
    if (kept[static_cast<size_t>(col)].conf >= config_.tau_new) born.push_back(col);
  }
  auto key = [&](int j) {
    const Detection& det = kept[static_cast<size_t>(j)];
    return std::make_tuple(-det.conf, det.box.cx(), det.box.cy(), det.box.w(), det.box.h(), det.x, j);
  };
  std::sort(born.begin(), born.end(), [&](int a, int b) { return key(a) < key(b); });
  for (int col : born) {
    Tracklet t;
    t.tid = next_tid_++;
    t.state = TrackState::New;
    Detection det = kept[static_cast<size_t>(col)];
    det.tid = t.tid;
    t.history.push_back(det);
    active_.push_back(std::move(t));
    add_entry(active_.back().tid, col);
  }

  if (!current.entries.empty()) {
    std::sort(current.entries.begin(), current.entries.end(),
              [](const WindowEntry& a, const WindowEntry& b) { return a.tid < b.tid; });
    window_.push_back(std::move(current));
  }
  std::erase_if(window_, [&](const WindowFrame& w) { return w.frame <= frame - T; });
  return out;
}

std::vector<Tracklet> Tracker::finish() {
  std::vector<Tracklet> all = std::move(finished_);
  for (Tracklet& t : active_) all.push_back(std::move(t));
  std::sort(all.begin(), all.end(), [](const Tracklet& a, const Tracklet& b) { return a.tid < b.tid; });
  active_.clear();
  finished_.clear();
  window_.clear();
  return all;
}

std::vector<std::vector<Detection>> trajectories_to_frames(std::span<const Tracklet> trajectories) {
  int max_frame = 0;
  for (const Tracklet& t : trajectories) {
    for (const Detection& d : t.history) max_frame = std::max(max_frame, d.frame);
  }
  std::vector<std::vector<Detection>> frames(static_cast<size_t>(max_frame));
  for (const Tracklet& t : trajectories) {
    for (Detection d : t.history) {
      d.tid = t.tid;
      frames[static_cast<size_t>(d.frame - 1)].push_back(d);
    }
  }
  for (auto& f : frames) {
    std::sort(f.begin(), f.end(), [](const Detection& a, const Detection& b) { return a.tid < b.tid; });
  }
  return frames;
}

}  // namespace mottx
