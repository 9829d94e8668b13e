#include "mottx/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>

#include "mottx/errors.hpp"
#include "mottx/targets.hpp"

namespace mottx {

void TrainConfig::validate() const {
  if (batch_size < 1 || epochs < 1 || clips_per_epoch < 1 || accumulation < 1) {
    throw std::invalid_argument("TrainConfig: batch_size, epochs, clips_per_epoch and accumulation must be >= 1");
  }
  if (clip_schedule.empty()) throw std::invalid_argument("TrainConfig: clip_schedule is empty");
  for (int len : clip_schedule) {
    if (len < 2) throw std::invalid_argument("TrainConfig: clip lengths must be >= 2");
  }
  if (max_clip_length < 2) throw std::invalid_argument("TrainConfig: max_clip_length must be >= 2");
  if (!(lr > 0.0) || !(min_lr >= 0.0) || min_lr > lr) throw std::invalid_argument("TrainConfig: need 0 <= min_lr <= lr");
  if (!(weight_decay >= 0.0) || !(grad_clip > 0.0)) {
    throw std::invalid_argument("TrainConfig: weight_decay must be >= 0 and grad_clip > 0");
  }
  if (min_interval < 1 || max_interval < min_interval) throw std::invalid_argument("TrainConfig: bad interval range");
  if (!(box_jitter >= 0.0) || !(drop_rate >= 0.0 && drop_rate < 1.0) || !(clutter_rate >= 0.0 && clutter_rate < 1.0)) {
    throw std::invalid_argument("TrainConfig: augmentation rates must be in [0,1) and box_jitter >= 0");
  }
}

int TrainConfig::clip_length(int epoch) const {
  const size_t i = std::min(static_cast<size_t>(std::max(epoch, 0)), clip_schedule.size() - 1);
  return std::min(clip_schedule[i], max_clip_length);
}

namespace {

constexpr int kClutterTid = 1 << 28;

std::vector<Detection> augment(const std::vector<Detection>& gt, const TrainConfig& config, double width,
                               double height, int& clutter, std::mt19937_64& rng) {
  if (config.box_jitter <= 0.0 && config.drop_rate <= 0.0 && config.clutter_rate <= 0.0) return gt;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Detection> out;
  for (const Detection& g : gt) {
    if (config.drop_rate > 0.0 && unit(rng) < config.drop_rate) continue;
    Detection d = g;
    if (config.box_jitter > 0.0) {
      const double s = config.box_jitter;
      const double bw = std::max(1.0, g.box.w() + s * normal(rng));
      const double bh = std::max(1.0, g.box.h() + s * normal(rng));
      const double cx = std::clamp(g.box.cx() + s * normal(rng), 0.0, width);
      const double cy = std::clamp(g.box.cy() + s * normal(rng), 0.0, height);
      d.box = BBox(cx, cy, bw, bh);
    }
    out.push_back(d);
  }
  if (config.clutter_rate > 0.0) {
    for (size_t k = 0; k < gt.size(); ++k) {
      if (!(unit(rng) < config.clutter_rate)) continue;
      const BBox& like = gt[static_cast<size_t>(unit(rng) * static_cast<double>(gt.size())) % gt.size()].box;
      const double bw = std::min(like.w(), width);
      const double bh = std::min(like.h(), height);
      Detection d;
      d.frame = gt[k].frame;
      d.box = BBox(0.5 * bw + unit(rng) * (width - bw), 0.5 * bh + unit(rng) * (height - bh), bw, bh);
      d.conf = 0.3;
      ++clutter;
      d.tid = kClutterTid + clutter;
      d.x = -clutter;
      out.push_back(d);
    }
  }
  return out;
}

}  // namespace

TrainingSample<float> sample_clip(const TrainingSequence& seq, int length, const TrainConfig& config,
                                  std::mt19937_64& rng) {
  const int num_frames = static_cast<int>(seq.frames.size());
  if (num_frames < 1) throw DataError("sample_clip: sequence has no frames");
  if (!seq.source) throw std::invalid_argument("sample_clip: sequence has no patch source");
  length = std::clamp(length, 1, num_frames);
  int interval = std::uniform_int_distribution<int>(config.min_interval, config.max_interval)(rng);
  if (length > 1) interval = std::max(1, std::min(interval, (num_frames - 1) / (length - 1)));
  const int last_start = num_frames - (length - 1) * interval;
  const int start = std::uniform_int_distribution<int>(1, last_start)(rng);

  TrainingSample<float> sample;
  sample.layout = SequenceLayout::with_bos();
  std::vector<std::vector<ClipObject>> objects(static_cast<size_t>(length));
  std::vector<TensorF> blocks;
  Eigen::Index total = 0;
  const double w = seq.source->frame_width();
  const double h = seq.source->frame_height();
  int clutter = 0;
  for (int k = 0; k < length; ++k) {
    const int frame = start + k * interval;
    std::vector<Detection> dets = augment(seq.frames[static_cast<size_t>(frame - 1)], config, w, h, clutter, rng);
    std::shuffle(dets.begin(), dets.end(), rng);
    for (const Detection& d : dets) {
      if (d.tid < 0) throw DataError("sample_clip: training frames need tids >= 0");
      objects[static_cast<size_t>(k)].push_back({d.tid, static_cast<int>(sample.layout.size())});
      sample.layout.push(k, normalize_box(d.box, w, h), d.tid);
    }
    TensorF block;
    seq.source->patches(frame, dets, block);
    total += block.rows();
    blocks.push_back(std::move(block));
  }
  sample.raw.resize(total, kRawPatchSize);
  Eigen::Index row = 0;
  for (const TensorF& b : blocks) {
    if (b.rows() > 0) sample.raw.middleRows(row, b.rows()) = b;
    row += b.rows();
  }
  sample.targets = build_targets(objects);
  return sample;
}

double cosine_lr(int step, int total, double base, double floor) {
  if (total <= 1) return base;
  const double p = std::clamp(static_cast<double>(step) / (total - 1), 0.0, 1.0);
  return floor + (base - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * p));
}

double clip_grad_norm(ModelParams<float>& grads, double max_norm) {
  double sq = 0.0;
  grads.visit([&](const std::string&, const TensorF& t) { sq += t.cast<double>().squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const float scale = static_cast<float>(max_norm / norm);
    grads.visit([&](const std::string&, TensorF& t) { t *= scale; });
  }
  return norm;
}

AdamW::AdamW(const ModelParams<float>& like, const AdamWConfig& config)
    : config_(config), m_(ModelParams<float>::zeros(like.config)), v_(ModelParams<float>::zeros(like.config)) {}

void AdamW::step(ModelParams<float>& params, const ModelParams<float>& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, t_);
  const double c2 = 1.0 - std::pow(config_.beta2, t_);
  const float b1 = static_cast<float>(config_.beta1);
  const float b2 = static_cast<float>(config_.beta2);
  const float decay = static_cast<float>(1.0 - lr * config_.weight_decay);
  const float step = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(config_.eps);

  std::vector<const TensorF*> g;
  std::vector<TensorF*> m;
  std::vector<TensorF*> v;
  grads.visit([&](const std::string&, const TensorF& t) { g.push_back(&t); });
  m_.visit([&](const std::string&, TensorF& t) { m.push_back(&t); });
  v_.visit([&](const std::string&, TensorF& t) { v.push_back(&t); });
  size_t i = 0;
  params.visit([&](const std::string&, TensorF& p) {
    auto ga = g[i]->array();
    auto ma = m[i]->array();
    auto va = v[i]->array();
    ma = b1 * ma + (1.0f - b1) * ga;
    va = b2 * va + (1.0f - b2) * ga.square();
    p.array() = p.array() * decay - step * ma / ((va * inv_c2).sqrt() + eps);
    ++i;
  });
}

int default_threads() {
  if (const char* env = std::getenv("MOTTX_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

bool all_finite(const ModelParams<float>& p) {
  bool ok = true;
  p.visit([&](const std::string&, const TensorF& t) { ok = ok && t.allFinite(); });
  return ok;
}

void add_into(ModelParams<float>& dst, const ModelParams<float>& src) {
  std::vector<const TensorF*> parts;
  src.visit([&](const std::string&, const TensorF& t) { parts.push_back(&t); });
  size_t i = 0;
  dst.visit([&](const std::string&, TensorF& t) { t += *parts[i++]; });
}

}  // namespace

TrainResult train(const std::vector<TrainingSequence>& data, const ModelParams<float>& init,
                  const TrainConfig& config, int threads, const TrainCallback& on_step,
                  const TrainCallback& on_epoch) {
  config.validate();
  init.validate();
  if (data.empty()) throw DataError("train: no training sequences");
  for (int e = 0; e < config.epochs; ++e) {
    if (config.clip_length(e) > init.config.max_window) {
      throw std::invalid_argument("train: clip length " + std::to_string(config.clip_length(e)) +
                                  " exceeds max_window " + std::to_string(init.config.max_window));
    }
  }

  const int batches_per_epoch = (config.clips_per_epoch + config.batch_size - 1) / config.batch_size;
  const int steps_per_epoch = (batches_per_epoch + config.accumulation - 1) / config.accumulation;
  const int total_steps = steps_per_epoch * config.epochs;

  TrainResult result;
  result.params = init;
  AdamW opt(init, AdamWConfig{0.9, 0.999, 1e-8, config.weight_decay});
  ModelParams<float> grads = ModelParams<float>::zeros(init.config);
  ModelParams<float> accum = ModelParams<float>::zeros(init.config);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<size_t> pick(0, data.size() - 1);
  LossOptions options;
  options.threads = threads;

  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const int length = config.clip_length(epoch);
    double epoch_sum = 0.0;
    int epoch_batches = 0;
    int clips_left = config.clips_per_epoch;
    for (int s = 0; s < steps_per_epoch; ++s) {
      accum.set_zero();
      double step_loss = 0.0;
      int in_step = 0;
      for (int a = 0; a < config.accumulation && clips_left > 0; ++a) {
        std::vector<TrainingSample<float>> batch;
        for (int b = 0; b < config.batch_size && clips_left > 0; ++b, --clips_left) {
          batch.push_back(sample_clip(data[pick(rng)], length, config, rng));
        }
        options.dropout = DropoutPlan{init.config.dropout, rng()};
        float loss = 0.0f;
        try {
          loss = loss_and_gradients<float>(batch, result.params, grads, options);
        } catch (const NumericError& e) {
          result.diverged = true;
          result.message = "epoch " + std::to_string(epoch + 1) + ", step " + std::to_string(step) + ": " + e.what();
          result.steps = step;
          return result;
        }
        add_into(accum, grads);
        step_loss += loss;
        ++in_step;
      }
      if (in_step == 0) continue;
      const float inv = 1.0f / static_cast<float>(in_step);
      accum.visit([&](const std::string&, TensorF& t) { t *= inv; });
      const double norm = clip_grad_norm(accum, config.grad_clip);
      const double lr = cosine_lr(step, total_steps, config.lr, config.min_lr);

      ModelParams<float> before = result.params;
      opt.step(result.params, accum, lr);
      if (!std::isfinite(norm) || !all_finite(result.params)) {
        result.params = std::move(before);
        result.diverged = true;
        result.message = "epoch " + std::to_string(epoch + 1) + ", step " + std::to_string(step) +
                         ": non-finite parameter update";
        result.steps = step;
        return result;
      }
      TrainLogEntry entry{epoch + 1, step, lr, step_loss / in_step, norm};
      result.log.push_back(entry);
      if (on_step) on_step(entry);
      epoch_sum += step_loss;
      epoch_batches += in_step;
      ++step;
    }
    result.epoch_loss.push_back(epoch_batches > 0 ? epoch_sum / epoch_batches : 0.0);
    if (on_epoch) {
      on_epoch(TrainLogEntry{epoch + 1, step, result.log.empty() ? config.lr : result.log.back().lr,
                             result.epoch_loss.back(), 0.0});
    }
  }
  result.steps = step;
  return result;
}

}  // namespace mottx
