#include "mottx/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace mottx {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent generator for one (seed, stream, index) triple.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag, std::int64_t a, std::int64_t b = 0) {
  std::uint64_t h = splitmix(seed ^ splitmix(tag));
  h = splitmix(h ^ static_cast<std::uint64_t>(a));
  h = splitmix(h ^ static_cast<std::uint64_t>(b));
  return std::mt19937_64(h);
}

enum StreamTag : std::uint64_t {
  kMotion = 1,
  kStyle = 2,
  kReentry = 3,
  kGain = 4,
  kNoise = 5,
  kClutter = 6,
  kCorrupt = 7,
  kBackground = 8,
};

constexpr double kSharedStripe = 4.0;

ObjectStyle random_style(std::mt19937_64& rng, double similarity) {
  std::uniform_real_distribution<double> color(0.1, 0.9);
  std::uniform_real_distribution<double> freq(1.0, 7.0);
  std::uniform_real_distribution<double> depth(0.15, 0.6);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double lambda = 0.9 * std::clamp(similarity, 0.0, 1.0);
  auto blend = [lambda](double own, double shared) { return (1.0 - lambda) * own + lambda * shared; };
  ObjectStyle s;
  for (int c = 0; c < 3; ++c) s.upper[c] = static_cast<float>(blend(color(rng), 0.55));
  for (int c = 0; c < 3; ++c) s.lower[c] = static_cast<float>(blend(color(rng), 0.35));
  s.stripe_u = blend(freq(rng), kSharedStripe);
  s.stripe_v = blend(freq(rng), kSharedStripe);
  s.phase = blend(phase(rng), 0.0);
  s.stripe_depth = blend(depth(rng), 0.3);
  return s;
}

struct Motion {
  double cx, cy, vx, vy, w, h;
};

void spawn(Motion& m, const SceneConfig& c, std::mt19937_64& rng, bool new_size) {
  if (new_size) {
    m.w = std::uniform_real_distribution<double>(c.min_box_w, c.max_box_w)(rng);
    m.h = std::uniform_real_distribution<double>(c.min_box_h, c.max_box_h)(rng);
  }
  m.cx = std::uniform_real_distribution<double>(0.5 * m.w, c.width - 0.5 * m.w)(rng);
  m.cy = std::uniform_real_distribution<double>(0.5 * m.h, c.height - 0.5 * m.h)(rng);
  const double speed = std::uniform_real_distribution<double>(c.min_speed, c.max_speed)(rng);
  const double angle = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  m.vx = speed * std::cos(angle);
  m.vy = speed * std::sin(angle);
}

void advance(Motion& m, const SceneConfig& c) {
  m.cx += m.vx;
  m.cy += m.vy;
  const double hw = 0.5 * m.w;
  const double hh = 0.5 * m.h;
  if (m.cx - hw < 0.0) {
    m.cx = 2.0 * hw - m.cx;
    m.vx = std::abs(m.vx);
  } else if (m.cx + hw > c.width) {
    m.cx = 2.0 * (c.width - hw) - m.cx;
    m.vx = -std::abs(m.vx);
  }
  if (m.cy - hh < 0.0) {
    m.cy = 2.0 * hh - m.cy;
    m.vy = std::abs(m.vy);
  } else if (m.cy + hh > c.height) {
    m.cy = 2.0 * (c.height - hh) - m.cy;
    m.vy = -std::abs(m.vy);
  }
  m.cx = std::clamp(m.cx, hw, c.width - hw);
  m.cy = std::clamp(m.cy, hh, c.height - hh);
}

bool inside(const GapWindow& w, int frame) {
  return frame >= w.start && frame < w.start + w.gap;
}

double frame_gain(std::uint64_t seed, int key, int frame, double jitter) {
  if (jitter <= 0.0) return 1.0;
  auto rng = stream(seed, kGain, key, frame);
  return std::max(0.0, 1.0 + std::normal_distribution<double>(0.0, jitter)(rng));
}

void sample_style(const ObjectStyle& style, std::span<float> out) {
  size_t k = 0;
  for (int i = 0; i < kPatchGrid; ++i) {
    const double v = (i + 0.5) / kPatchGrid;
    for (int j = 0; j < kPatchGrid; ++j) {
      const double u = (j + 0.5) / kPatchGrid;
      for (int c = 0; c < kPatchChannels; ++c) out[k++] = style.value(u, v, c);
    }
  }
}

}  // namespace

float ObjectStyle::value(double u, double v, int channel) const {
  const float base = v < 0.5 ? upper[static_cast<size_t>(channel)] : lower[static_cast<size_t>(channel)];
  const double stripe = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (stripe_u * u + stripe_v * v) + phase);
  return static_cast<float>(std::clamp(base * (1.0 - stripe_depth * stripe), 0.0, 1.0));
}

void SceneConfig::validate() const {
  if (width < 1 || height < 1) throw std::invalid_argument("SceneConfig: canvas must be non-empty");
  if (num_objects < 0 || num_frames < 1) throw std::invalid_argument("SceneConfig: bad object or frame count");
  if (!(min_box_w > 0.0) || !(min_box_h > 0.0) || min_box_w > max_box_w || min_box_h > max_box_h) {
    throw std::invalid_argument("SceneConfig: bad box size range");
  }
  if (max_box_w > width || max_box_h > height) {
    throw std::invalid_argument("SceneConfig: objects larger than the canvas");
  }
  if (min_speed < 0.0 || min_speed > max_speed) throw std::invalid_argument("SceneConfig: bad speed range");
  if (appearance_similarity < 0.0 || appearance_similarity > 1.0) {
    throw std::invalid_argument("SceneConfig: appearance_similarity must be in [0,1]");
  }
  std::vector<std::vector<GapWindow>> per_tid(static_cast<size_t>(num_objects) + 1);
  for (const auto* list : {&occlusions, &reentries}) {
    for (const GapWindow& w : *list) {
      if (w.tid < 1 || w.tid > num_objects) {
        throw std::invalid_argument("SceneConfig: gap window for unknown tid " + std::to_string(w.tid));
      }
      if (w.gap < 1) throw std::invalid_argument("SceneConfig: gap lengths must be >= 1");
      if (w.start < 2 || w.start + w.gap > num_frames) {
        throw std::invalid_argument("SceneConfig: gap window for tid " + std::to_string(w.tid) +
                                    " must start after frame 1 and end before the last frame");
      }
      per_tid[static_cast<size_t>(w.tid)].push_back(w);
    }
  }
  for (auto& windows : per_tid) {
    std::sort(windows.begin(), windows.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    for (size_t i = 1; i < windows.size(); ++i) {
      if (windows[i].start <= windows[i - 1].start + windows[i - 1].gap) {
        throw std::invalid_argument("SceneConfig: gap windows of one tid must be separated by a visible frame");
      }
    }
  }
}

Scene generate(const SceneConfig& config) {
  config.validate();
  Scene scene;
  scene.config_ = config;
  const int n = config.num_objects;

  for (int k = 0; k < n; ++k) {
    auto rng = stream(config.seed, kStyle, k);
    scene.styles_.push_back(random_style(rng, config.appearance_similarity));
  }

  std::vector<Motion> motion(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    auto rng = stream(config.seed, kMotion, k);
    spawn(motion[static_cast<size_t>(k)], config, rng, true);
  }

  scene.gt_.resize(static_cast<size_t>(config.num_frames));
  for (int frame = 1; frame <= config.num_frames; ++frame) {
    for (int k = 0; k < n; ++k) {
      const int tid = k + 1;
      Motion& m = motion[static_cast<size_t>(k)];
      if (frame > 1) {
        bool respawned = false;
        for (const GapWindow& w : config.reentries) {
          if (w.tid == tid && frame == w.start + w.gap) {
            auto rng = stream(config.seed, kReentry, tid, w.start);
            spawn(m, config, rng, false);
            respawned = true;
          }
        }
        if (!respawned) advance(m, config);
      }
      bool hidden = false;
      for (const auto* list : {&config.occlusions, &config.reentries}) {
        for (const GapWindow& w : *list) hidden = hidden || (w.tid == tid && inside(w, frame));
      }
      if (hidden) continue;
      Detection d;
      d.frame = frame;
      d.tid = tid;
      d.box = BBox(m.cx, m.cy, m.w, m.h);
      d.conf = 1.0;
      d.x = k;
      scene.gt_[static_cast<size_t>(frame - 1)].push_back(d);
    }
  }

  scene.background_ = FrameImage(config.width, config.height);
  auto rng = stream(config.seed, kBackground, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double fx = 1.0 + 3.0 * unit(rng);
  const double fy = 1.0 + 3.0 * unit(rng);
  for (int y = 0; y < config.height; ++y) {
    for (int x = 0; x < config.width; ++x) {
      const double gx = static_cast<double>(x) / config.width;
      const double gy = static_cast<double>(y) / config.height;
      const double tex = std::sin(2.0 * std::numbers::pi * fx * gx) * std::cos(2.0 * std::numbers::pi * fy * gy);
      for (int c = 0; c < 3; ++c) {
        scene.background_.at(y, x, c) = static_cast<float>(0.4 + 0.1 * gy + 0.08 * tex + 0.03 * c);
      }
    }
  }
  return scene;
}

FrameImage Scene::render(int frame) const {
  FrameImage img = background_;
  std::vector<const Detection*> order;
  for (const Detection& d : ground_truth(frame)) order.push_back(&d);
  std::stable_sort(order.begin(), order.end(),
                   [](const Detection* a, const Detection* b) { return a->box.bottom() < b->box.bottom(); });
  for (const Detection* d : order) {
    const ObjectStyle& style = styles_[static_cast<size_t>(d->tid - 1)];
    const double gain = frame_gain(config_.seed, d->tid - 1, frame, config_.brightness_jitter);
    const BBox& b = d->box;
    const int x0 = std::max(0, static_cast<int>(std::floor(b.left())));
    const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(b.right())));
    const int y0 = std::max(0, static_cast<int>(std::floor(b.top())));
    const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(b.bottom())));
    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      if (py < b.top() || py >= b.bottom()) continue;
      const double v = (py - b.top()) / b.h();
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        if (px < b.left() || px >= b.right()) continue;
        const double u = (px - b.left()) / b.w();
        for (int c = 0; c < 3; ++c) {
          img.at(y, x, c) = static_cast<float>(std::clamp(style.value(u, v, c) * gain, 0.0, 1.0));
        }
      }
    }
  }
  return img;
}

std::vector<float> Scene::base_appearance(int key) const {
  std::vector<float> out(kRawPatchSize);
  sample_style(styles_.at(static_cast<size_t>(key)), out);
  return out;
}

// ---------------------------------------------------------------------------

AppearanceBank::AppearanceBank(std::vector<std::vector<float>> base, double brightness_jitter, double noise,
                               std::uint64_t seed)
    : base_(std::move(base)), brightness_jitter_(brightness_jitter), noise_(noise), seed_(seed) {
  for (const auto& v : base_) {
    if (v.size() != static_cast<size_t>(kRawPatchSize)) {
      throw std::invalid_argument("AppearanceBank: base vectors must have 12288 values");
    }
  }
}

AppearanceBank::AppearanceBank(const Scene& scene)
    : AppearanceBank({}, scene.config().brightness_jitter, scene.config().appearance_noise, scene.config().seed) {
  for (int k = 0; k < scene.config().num_objects; ++k) base_.push_back(scene.base_appearance(k));
}

void AppearanceBank::appearance(int key, int frame, std::span<float> out) const {
  if (out.size() != static_cast<size_t>(kRawPatchSize)) {
    throw std::invalid_argument("AppearanceBank: output must hold 12288 values");
  }
  double gain = 1.0;
  if (key >= 0) {
    if (key >= static_cast<int>(base_.size())) {
      throw std::out_of_range("AppearanceBank: unknown appearance key " + std::to_string(key));
    }
    std::copy(base_[static_cast<size_t>(key)].begin(), base_[static_cast<size_t>(key)].end(), out.begin());
    gain = frame_gain(seed_, key, frame, brightness_jitter_);
  } else {
    auto rng = stream(seed_, kClutter, key, frame);
    sample_style(random_style(rng, 0.0), out);
  }
  auto rng = stream(seed_, kNoise, key, frame);
  std::normal_distribution<float> noise(0.0f, static_cast<float>(noise_));
  for (float& v : out) {
    const float n = noise_ > 0.0 ? noise(rng) : 0.0f;
    v = std::clamp(static_cast<float>(v * gain) + n, 0.0f, 1.0f);
  }
}

void AppearancePatchSource::patches(int frame, std::span<const Detection> dets, TensorF& out) const {
  out.resize(static_cast<Eigen::Index>(dets.size()), kRawPatchSize);
  for (size_t i = 0; i < dets.size(); ++i) {
    bank_.appearance(static_cast<int>(std::lround(dets[i].x)), frame,
                     std::span<float>(out.row(static_cast<Eigen::Index>(i)).data(), kRawPatchSize));
  }
}

std::unique_ptr<PatchSource> make_patch_source(const Scene& scene) {
  const SceneConfig& c = scene.config();
  if (c.render) {
    return std::make_unique<ImagePatchSource>(c.width, c.height, [&scene](int frame) { return scene.render(frame); });
  }
  return std::make_unique<AppearancePatchSource>(AppearanceBank(scene), c.width, c.height);
}

// ---------------------------------------------------------------------------

void NoiseConfig::validate() const {
  if (box_sigma < 0.0 || conf_sigma < 0.0) throw std::invalid_argument("NoiseConfig: sigmas must be >= 0");
  if (fp_rate < 0.0 || fp_rate >= 1.0 || fn_rate < 0.0 || fn_rate > 1.0) {
    throw std::invalid_argument("NoiseConfig: rates must be in [0,1)");
  }
  if (fp_conf_min < 0.0 || fp_conf_max > 1.0 || fp_conf_min > fp_conf_max) {
    throw std::invalid_argument("NoiseConfig: bad false-positive confidence range");
  }
}

std::vector<std::vector<Detection>> corrupt(const std::vector<std::vector<Detection>>& gt, const NoiseConfig& noise,
                                            int width, int height) {
  noise.validate();
  std::vector<std::vector<Detection>> out(gt.size());
  for (size_t f = 0; f < gt.size(); ++f) {
    auto rng = stream(noise.seed, kCorrupt, static_cast<std::int64_t>(f));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 1.0);
    auto& dets = out[f];
    for (const Detection& g : gt[f]) {
      if (unit(rng) < noise.fn_rate) continue;
      Detection d = g;
      d.tid = kUnassigned;
      if (noise.box_sigma > 0.0) {
        const double cx = g.box.cx() + noise.box_sigma * jitter(rng);
        const double cy = g.box.cy() + noise.box_sigma * jitter(rng);
        const double w = std::max(1.0, g.box.w() + noise.box_sigma * jitter(rng));
        const double h = std::max(1.0, g.box.h() + noise.box_sigma * jitter(rng));
        d.box = BBox(cx, cy, w, h);
      }
      d.conf = noise.conf_sigma > 0.0 ? std::clamp(1.0 - std::abs(noise.conf_sigma * jitter(rng)), 0.0, 1.0) : 1.0;
      dets.push_back(d);
    }
    int clutter = 0;
    for (size_t k = 0; k < gt[f].size(); ++k) {
      if (!(unit(rng) < noise.fp_rate)) continue;
      const BBox& like = gt[f][static_cast<size_t>(unit(rng) * static_cast<double>(gt[f].size())) % gt[f].size()].box;
      const double w = std::min(like.w(), static_cast<double>(width));
      const double h = std::min(like.h(), static_cast<double>(height));
      Detection d;
      d.frame = static_cast<int>(f) + 1;
      if (!gt[f].empty()) d.frame = gt[f].front().frame;
      d.tid = kUnassigned;
      d.box = BBox(0.5 * w + unit(rng) * (width - w), 0.5 * h + unit(rng) * (height - h), w, h);
      d.conf = noise.fp_conf_min + unit(rng) * (noise.fp_conf_max - noise.fp_conf_min);
      d.x = -1 - clutter++;
      dets.push_back(d);
    }
    std::shuffle(dets.begin(), dets.end(), rng);
  }
  return out;
}

}  // namespace mottx
