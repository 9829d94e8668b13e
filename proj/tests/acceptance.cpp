// Acceptance checks. Usage: mottx_acceptance [criterion ...]
// With no arguments every criterion runs. Each prints one PASS or FAIL line;
// the exit status is nonzero if any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mottx/association.hpp"
#include "mottx/checkpoint.hpp"
#include "mottx/dataset.hpp"
#include "mottx/hungarian.hpp"
#include "mottx/metrics.hpp"
#include "mottx/model.hpp"
#include "mottx/mot_io.hpp"
#include "mottx/objective.hpp"
#include "mottx/synth.hpp"
#include "mottx/targets.hpp"
#include "mottx/tracker.hpp"
#include "mottx/training.hpp"

using namespace mottx;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

ModelConfig model_config(int d, int layers, int heads, int max_window) {
  ModelConfig c;
  c.d_model = d;
  c.n_layers = layers;
  c.n_heads = heads;
  c.max_window = max_window;
  return c;
}

// ---------------------------------------------------------------------------
// 1. finite differences

Outcome gradients() {
  const auto t0 = Clock::now();
  Outcome out{true, {}};
  double worst = 0.0;
  std::string worst_at;
  size_t checked = 0;
  double richardson_worst = 0.0;
  for (int k = 0; k < 4; ++k) {
    GradCheckOptions o;
    o.config = model_config(8, 1 + k % 2, 1 + (k / 2) % 2, 8);
    o.frames = 2;
    o.seed = static_cast<std::uint64_t>(k + 1);
    o.step = 1e-4;
    o.rel_tol = 1e-4;
    o.min_grad = 1e-8;
    const GradCheckReport r = gradient_check(o);
    checked += r.checked;
    if (!r.passed()) out.pass = false;
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_at = r.worst_param + " (seed " + std::to_string(k + 1) + ")";
    }
    o.richardson = true;
    richardson_worst = std::max(richardson_worst, gradient_check(o).max_rel_error);
  }
  const double secs = seconds_since(t0);
  if (secs >= 60.0) out.pass = false;
  std::cout << "INFO 1: extrapolated differences (h, h/2) give max rel error " << fmt(richardson_worst) << '\n';
  out.detail = std::to_string(checked) + " entries over 4 configs, max rel error " + fmt(worst) + " at " + worst_at +
               ", " + fmt(secs, 3) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// 2. same-frame permutation

Outcome permutation() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const ModelConfig mc = model_config(32, 2, 4, 32);
  const auto params = ModelParams<double>::random(mc, 11);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    TokenSequence<double> seq;
    seq.layout = SequenceLayout::with_bos();
    const int frames = 1 + static_cast<int>(rng() % 6);
    for (int f = 0; f < frames; ++f) {
      const int k = 1 + static_cast<int>(rng() % 5);
      for (int i = 0; i < k; ++i) seq.layout.push(f, NormBox{unit(rng), unit(rng), 0.02 + 0.3 * unit(rng), 0.02 + 0.3 * unit(rng)}, i);
    }
    const auto n = static_cast<Eigen::Index>(seq.layout.size());
    seq.tokens = TensorD::Zero(n, mc.d_model);
    for (Eigen::Index i = 1; i < n; ++i)
      for (int j = 0; j < mc.d_model; ++j) seq.tokens(i, j) = normal(rng);

    // shuffle each frame's block
    std::vector<size_t> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (size_t s = 1; s < perm.size();) {
      size_t e = s;
      while (e < perm.size() && seq.layout.frame_index[e] == seq.layout.frame_index[s]) ++e;
      std::shuffle(perm.begin() + static_cast<long>(s), perm.begin() + static_cast<long>(e), rng);
      s = e;
    }
    TokenSequence<double> shuffled;
    shuffled.tokens.resize(n, mc.d_model);
    shuffled.layout = SequenceLayout::with_bos();
    shuffled.tokens.row(0) = seq.tokens.row(0);
    for (size_t i = 1; i < perm.size(); ++i) {
      shuffled.tokens.row(static_cast<Eigen::Index>(i)) = seq.tokens.row(static_cast<Eigen::Index>(perm[i]));
      shuffled.layout.push(seq.layout.frame_index[perm[i]], seq.layout.boxes[perm[i]], seq.layout.track_ids[perm[i]]);
    }
    const TensorD z = forward(params, seq);
    const TensorD zs = forward(params, shuffled);
    for (size_t i = 0; i < perm.size(); ++i) {
      worst = std::max(worst, (zs.row(static_cast<Eigen::Index>(i)) - z.row(static_cast<Eigen::Index>(perm[i])))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  }

  // tracker identities under shuffled detection order
  const auto tparams = ModelParams<float>::random(model_config(32, 2, 4, 31), 12);
  long mismatches = 0;
  long assigned = 0;
  for (int trial = 0; trial < 100; ++trial) {
    SceneConfig sc;
    sc.width = 320;
    sc.height = 240;
    sc.num_objects = 6;
    sc.num_frames = 12;
    sc.render = false;
    sc.seed = static_cast<std::uint64_t>(500 + trial);
    const Scene scene = generate(sc);
    NoiseConfig nc;
    nc.box_sigma = 1.0;
    nc.fp_rate = 0.1;
    nc.fn_rate = 0.1;
    nc.conf_sigma = 0.2;
    nc.seed = static_cast<std::uint64_t>(trial);
    const auto dets = corrupt(scene.ground_truth(), nc, sc.width, sc.height);
    const auto source = make_patch_source(scene);
    Tracker a(tparams, TrackerConfig{}, sc.width, sc.height);
    Tracker b(tparams, TrackerConfig{}, sc.width, sc.height);
    for (size_t f = 0; f < dets.size(); ++f) {
      std::vector<size_t> perm(dets[f].size());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<Detection> shuffled;
      for (size_t i : perm) shuffled.push_back(dets[f][i]);
      const auto ia = a.step(static_cast<int>(f + 1), dets[f], *source);
      const auto ib = b.step(static_cast<int>(f + 1), shuffled, *source);
      for (size_t i = 0; i < perm.size(); ++i) {
        if (ib[i] != ia[perm[i]]) ++mismatches;
        if (ib[i] >= 0) ++assigned;
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = worst <= 1e-5 && mismatches == 0 && secs < 60.0;
  out.detail = "max row difference " + fmt(worst) + ", tracker id mismatches " + std::to_string(mismatches) + " of " +
               std::to_string(assigned) + " assigned, " + fmt(secs, 3) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// 3. mask against the trajectory-graph feasibility rule

Outcome mask_rule() {
  std::mt19937_64 rng(3);
  long cells = 0;
  long mismatches = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 50);
    std::vector<int> frames{kBosFrame};
    int f = 0;
    for (int i = 1; i < n; ++i) {
      if (i > 1 && rng() % 3 == 0) f += 1 + static_cast<int>(rng() % 3);
      frames.push_back(f);
    }
    const auto mask = build_frame_causal_mask(frames);
    // An edge j -> i can exist in a trajectory graph only when j lies in a
    // strictly earlier frame; every token also keeps itself.
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const bool earlier = (j == 0 && i != 0) || (j > 0 && i > 0 && frames[j] < frames[i]);
        const bool expected = earlier || i == j;
        ++cells;
        if (mask[static_cast<size_t>(i)][static_cast<size_t>(j)] != expected) ++mismatches;
      }
    }
  }
  return {mismatches == 0, std::to_string(cells) + " cells over 2000 layouts, " + std::to_string(mismatches) +
                               " mismatches"};
}

// ---------------------------------------------------------------------------
// 4. similarity / affinity / weights against loops

Outcome association_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto box = [&] { return BBox(200 * unit(rng), 200 * unit(rng), 5 + 50 * unit(rng), 5 + 80 * unit(rng)); };
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 8);
    const int m = 1 + static_cast<int>(rng() % 8);
    const int d = 4 + static_cast<int>(rng() % 12);
    std::vector<int> owner;
    for (int t = 0; t < k; ++t) {
      const int rows = 1 + static_cast<int>(rng() % 3);
      for (int r = 0; r < rows; ++r) owner.push_back(t);
    }
    std::shuffle(owner.begin(), owner.end(), rng);
    const int n = static_cast<int>(owner.size());
    TensorD past(n, d), cur(m, d);
    for (Eigen::Index i = 0; i < past.size(); ++i) past.data()[i] = 0.5 * normal(rng);
    for (Eigen::Index i = 0; i < cur.size(); ++i) cur.data()[i] = 0.5 * normal(rng);
    std::vector<BBox> past_boxes, cur_boxes, traj_last, row_last;
    std::vector<BoxConfidence> traj_bc, det_bc;
    for (int i = 0; i < n; ++i) past_boxes.push_back(box());
    for (int t = 0; t < k; ++t) {
      traj_last.push_back(box());
      traj_bc.push_back({traj_last.back(), unit(rng)});
    }
    for (int i = 0; i < n; ++i) row_last.push_back(traj_last[static_cast<size_t>(owner[i])]);
    for (int j = 0; j < m; ++j) {
      cur_boxes.push_back(box());
      det_bc.push_back({cur_boxes.back(), unit(rng)});
    }

    const Eigen::MatrixXd s = similarity(past, cur, past_boxes, cur_boxes, row_last);
    const Eigen::MatrixXd a = affinity(s, owner, k);
    const Eigen::MatrixXd w = weights(traj_bc, det_bc, 0.05);

    std::vector<std::vector<double>> so(n, std::vector<double>(m));
    for (int i = 0; i < n; ++i) {
      double z = 0;
      std::vector<double> e(m);
      for (int j = 0; j < m; ++j) {
        double dot = 0;
        for (int c = 0; c < d; ++c) dot += past(i, c) * cur(j, c);
        e[j] = std::exp(dot);
        z += e[j];
      }
      for (int j = 0; j < m; ++j) {
        so[i][j] = e[j] / z * iou_scale(past_boxes[i], cur_boxes[j]) + iou(row_last[i], cur_boxes[j]);
        worst = std::max(worst, std::abs(so[i][j] - s(i, j)));
      }
    }
    for (int t = 0; t < k; ++t) {
      for (int j = 0; j < m; ++j) {
        double best = -1e300;
        for (int i = 0; i < n; ++i)
          if (owner[i] == t) best = std::max(best, so[i][j]);
        worst = std::max(worst, std::abs(best - a(t, j)));
        const double wo =
            std::max(hmiou(traj_bc[t].box, det_bc[j].box), 0.05) * traj_bc[t].conf * det_bc[j].conf;
        worst = std::max(worst, std::abs(wo - w(t, j)));
      }
    }
  }
  return {worst <= 1e-6, "500 instances, max abs difference " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 5. Hungarian against enumeration

// Maximum total over all partial one-to-one maps, summed in row order.
double enumerate_best(const Eigen::MatrixXd& s) {
  const int rows = static_cast<int>(s.rows());
  const int cols = static_cast<int>(s.cols());
  double best = 0.0;
  std::vector<int> assign(static_cast<size_t>(rows), -1);
  std::vector<bool> used(static_cast<size_t>(cols), false);
  std::function<void(int)> rec = [&](int r) {
    if (r == rows) {
      double total = 0;
      for (int i = 0; i < rows; ++i)
        if (assign[i] >= 0) total += s(i, assign[i]);
      best = std::max(best, total);
      return;
    }
    assign[r] = -1;
    rec(r + 1);
    for (int c = 0; c < cols; ++c) {
      if (used[c]) continue;
      used[c] = true;
      assign[r] = c;
      rec(r + 1);
      used[c] = false;
    }
    assign[r] = -1;
  };
  rec(0);
  return best;
}

Outcome hungarian_optimality() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  long wrong = 0;
  long not_injective = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int rows = 1 + static_cast<int>(rng() % 7);
    const int cols = 1 + static_cast<int>(rng() % 7);
    Eigen::MatrixXd s(rows, cols);
    const bool integer = trial % 3 == 0;  // plenty of ties
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = integer ? static_cast<double>(rng() % 4) : unit(rng);
    const Assignment a = hungarian_max(s, 0.0);
    std::set<int> r, c;
    for (auto [i, j] : a.matches) {
      if (!r.insert(i).second || !c.insert(j).second) ++not_injective;
    }
    if (assignment_total(s, a) != enumerate_best(s)) ++wrong;
  }
  return {wrong == 0 && not_injective == 0, "1000 matrices up to 7x7, " + std::to_string(wrong) +
                                                " suboptimal, " + std::to_string(not_injective) + " not one-to-one"};
}

// ---------------------------------------------------------------------------
// 6. loss spot values

Outcome loss_values() {
  TensorD z(4, 2);
  z << 0, 0, 1, 0, 2, 0, 0, 1;
  FramePairTargets a;
  a.frame = 1;
  a.columns = {2, 3};
  a.row_sources = {1};
  a.row_targets = {0};
  const double l1 = clip_loss<double>(z, std::vector<FramePairTargets>{a});

  TensorD u = TensorD::Zero(6, 3);
  u(1, 0) = 1;
  for (int c = 2; c < 6; ++c) u(c, 1) = 1;
  FramePairTargets b;
  b.frame = 1;
  b.columns = {2, 3, 4, 5};
  b.row_sources = {1};
  b.row_targets = {3};
  const double l2 = clip_loss<double>(u, std::vector<FramePairTargets>{b});
  const bool pass = std::abs(l1 - 0.126928) < 1e-6 && std::abs(l2 - 1.386294) < 1e-6;
  char buf[128];
  std::snprintf(buf, sizeof buf, "logits [2,0]: %.6f, uniform over 4: %.6f", l1, l2);
  return {pass, buf};
}

// ---------------------------------------------------------------------------
// 7/8. synthetic end-to-end

std::vector<GapWindow> random_gaps(std::mt19937_64& rng, int objects, int frames, int count, int min_gap,
                                   int max_gap) {
  std::vector<int> tids(static_cast<size_t>(objects));
  std::iota(tids.begin(), tids.end(), 1);
  std::shuffle(tids.begin(), tids.end(), rng);
  std::vector<GapWindow> out;
  for (int i = 0; i < count && i < objects; ++i) {
    const int gap = std::uniform_int_distribution<int>(min_gap, max_gap)(rng);
    const int start = std::uniform_int_distribution<int>(10, frames - gap - 10)(rng);
    out.push_back({tids[static_cast<size_t>(i)], start, gap});
  }
  return out;
}

SceneConfig e2e_scene(std::uint64_t seed, std::mt19937_64& rng) {
  SceneConfig c;
  c.num_objects = 10;
  c.num_frames = 200;
  c.appearance_similarity = 0.5;
  c.occlusions = random_gaps(rng, 10, 200, 4, 2, 15);
  c.seed = seed;
  return c;
}

struct Tracked {
  FrameDetections gt;
  FrameDetections pred;
};

Tracked run_tracker(const ModelParams<float>& params, const TrackerConfig& tc, const Scene& scene,
                    const NoiseConfig& noise) {
  const auto dets = corrupt(scene.ground_truth(), noise, scene.config().width, scene.config().height);
  const auto source = make_patch_source(scene);
  Tracker tracker(params, tc, scene.config().width, scene.config().height);
  for (size_t f = 0; f < dets.size(); ++f) tracker.step(static_cast<int>(f + 1), dets[f], *source);
  const auto trajectories = tracker.finish();
  Tracked t{scene.ground_truth(), trajectories_to_frames(trajectories)};
  t.pred.resize(t.gt.size());
  return t;
}

std::vector<TrainingSequence> training_set(const std::vector<SceneConfig>& configs) {
  std::vector<TrainingSequence> data;
  for (const auto& c : configs) {
    auto source = std::make_shared<ScenePatchSource>(generate(c));
    TrainingSequence seq;
    seq.frames = source->scene().ground_truth();
    seq.source = source;
    data.push_back(std::move(seq));
  }
  return data;
}

Outcome end_to_end() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(7);
  std::vector<SceneConfig> train_cfg;
  for (std::uint64_t s = 1; s <= 8; ++s) train_cfg.push_back(e2e_scene(s, rng));
  const auto data = training_set(train_cfg);

  TrainConfig tc;
  tc.epochs = 7;
  tc.clips_per_epoch = 64;
  tc.accumulation = 1;
  tc.lr = 5e-4;
  tc.seed = 7;
  const ModelConfig mc = model_config(64, 2, 4, 129);
  const int threads = default_threads();
  const TrainResult trained = train(data, ModelParams<float>::random(mc, 7), tc, threads);
  const double train_secs = seconds_since(t0);
  std::cout << "INFO 7: trained " << trained.steps << " steps on " << threads << " threads in " << fmt(train_secs, 3)
            << " s, epoch loss " << fmt(trained.epoch_loss.front()) << " -> " << fmt(trained.epoch_loss.back())
            << '\n';
  if (trained.diverged) return {false, "training diverged: " + trained.message};

  NoiseConfig clean;
  NoiseConfig noisy;
  noisy.box_sigma = 2.0;
  noisy.fp_rate = 0.05;
  noisy.fn_rate = 0.05;
  bool clean_ok = true;
  IdentityScore pooled;
  std::string per_scene;
  for (std::uint64_t s = 101; s <= 104; ++s) {
    const Scene scene = generate(e2e_scene(s, rng));
    const Tracked c = run_tracker(trained.params, TrackerConfig{}, scene, clean);
    const double acc = association_accuracy(c.gt, c.pred);
    const double f1 = idf1(c.gt, c.pred).idf1;
    clean_ok = clean_ok && acc >= 0.95 && f1 >= 0.90;
    noisy.seed = s;
    const Tracked n = run_tracker(trained.params, TrackerConfig{}, scene, noisy);
    const IdentityScore ns = idf1(n.gt, n.pred);
    pooled.idtp += ns.idtp;
    pooled.idfp += ns.idfp;
    pooled.idfn += ns.idfn;
    std::cout << "INFO 7: scene " << s << " clean accuracy " << fmt(acc) << " IDF1 " << fmt(f1) << ", noisy IDF1 "
              << fmt(ns.idf1) << '\n';
    per_scene += (per_scene.empty() ? "" : " ") + fmt(f1, 3) + "/" + fmt(ns.idf1, 3);
  }
  const double denom = 2.0 * pooled.idtp + pooled.idfp + pooled.idfn;
  pooled.idf1 = denom > 0 ? 2.0 * pooled.idtp / denom : 0.0;
  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = clean_ok && pooled.idf1 >= 0.80 && secs < 1800.0;
  out.detail = "clean " + std::string(clean_ok ? "ok" : "below target") + ", noisy pooled IDF1 " + fmt(pooled.idf1) +
               " (clean/noisy per scene " + per_scene + "), " + fmt(secs, 4) + " s";
  return out;
}

Outcome reentry() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(8);
  std::vector<SceneConfig> train_cfg;
  for (std::uint64_t s = 1; s <= 4; ++s) {
    SceneConfig c;
    c.num_objects = 6;
    c.num_frames = 120;
    c.occlusions = random_gaps(rng, 6, 120, 2, 2, 15);
    c.seed = 800 + s;
    train_cfg.push_back(c);
  }
  TrainConfig tc;
  tc.epochs = 5;
  tc.clip_schedule = {4, 8, 16, 32};
  tc.clips_per_epoch = 32;
  tc.accumulation = 1;
  tc.lr = 1e-3;
  tc.seed = 8;
  const TrainResult trained =
      train(training_set(train_cfg), ModelParams<float>::random(model_config(32, 1, 2, 33), 8), tc, default_threads());
  if (trained.diverged) return {false, "training diverged: " + trained.message};

  SceneConfig sc;
  sc.num_objects = 6;
  sc.num_frames = 100;
  sc.reentries = {{3, 40, 20}};
  sc.seed = 888;
  const Scene scene = generate(sc);
  TrackerConfig tcfg;
  tcfg.window_T = 30;
  tcfg.w_floor = 0.05;
  const Tracked t = run_tracker(trained.params, tcfg, scene, NoiseConfig{});

  // predicted ids of the re-entering object before and after its absence
  std::set<int> before, after;
  for (size_t f = 0; f < t.gt.size(); ++f) {
    for (const Detection& g : t.gt[f]) {
      if (g.tid != 3) continue;
      for (const Detection& p : t.pred[f]) {
        if (p.box == g.box) (static_cast<int>(f + 1) < 40 ? before : after).insert(p.tid);
      }
    }
  }
  auto ids = [](const std::set<int>& s) {
    std::string r;
    for (int v : s) r += (r.empty() ? "" : ",") + std::to_string(v);
    return "{" + r + "}";
  };
  const bool pass = before.size() == 1 && before == after;
  return {pass, "ids before the gap " + ids(before) + ", after " + ids(after) + ", " + fmt(seconds_since(t0), 3) +
                    " s"};
}

// ---------------------------------------------------------------------------
// 9. gap histogram on synthetic ground truth

Outcome gap_fidelity() {
  std::mt19937_64 rng(9);
  int exact = 0;
  const int scenes = 20;
  for (int s = 0; s < scenes; ++s) {
    SceneConfig c;
    c.width = 320;
    c.height = 240;
    c.num_objects = 8;
    c.num_frames = 150;
    c.render = false;
    c.seed = static_cast<std::uint64_t>(900 + s);
    // two non-overlapping windows for some objects, one for others
    std::vector<GapWindow> all = random_gaps(rng, 8, 70, 5, 1, 25);
    for (GapWindow w : random_gaps(rng, 8, 70, 3, 1, 25)) {
      w.start += 75;
      all.push_back(w);
    }
    for (const GapWindow& w : all) (rng() % 3 == 0 ? c.reentries : c.occlusions).push_back(w);
    std::map<int, long> expected;
    for (const GapWindow& w : all) ++expected[w.gap + 1];  // reappears gap + 1 frames after the last sighting
    std::map<int, double> expected_pct;
    long total = 0;
    for (auto [k, v] : expected) total += v;
    for (auto [k, v] : expected) expected_pct[k] = 100.0 * static_cast<double>(v) / static_cast<double>(total);
    const auto gt = generate(c).ground_truth();
    if (gap_counts(gt) == expected && gap_histogram(gt) == expected_pct) ++exact;
  }
  return {exact == scenes, std::to_string(exact) + " of " + std::to_string(scenes) + " scenes match exactly"};
}

// ---------------------------------------------------------------------------
// 10. round trips

Outcome round_trips() {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  long lines_lost = 0;
  for (int trial = 0; trial < 100; ++trial) {
    FrameDetections frames(1 + rng() % 30);
    for (size_t f = 0; f < frames.size(); ++f) {
      for (int tid = 0; tid < 8; ++tid) {
        if (rng() % 4 == 0) continue;
        Detection d;
        d.frame = static_cast<int>(f + 1);
        d.tid = tid;
        d.box = BBox::from_ltwh(1000 * unit(rng), 1000 * unit(rng), 1 + 200 * unit(rng), 1 + 200 * unit(rng));
        d.conf = unit(rng);
        frames[f].push_back(d);
      }
    }
    std::stringstream buf;
    write_mot(buf, frames);
    const MotData back = parse_mot(buf);
    for (size_t f = 0; f < frames.size(); ++f) {
      const auto& got = f < back.frames.size() ? back.frames[f] : std::vector<Detection>{};
      if (got.size() != frames[f].size()) {
        ++lines_lost;
        continue;
      }
      for (size_t i = 0; i < got.size(); ++i) {
        const Detection& a = frames[f][i];
        const Detection& b = got[i];
        if (a.tid != b.tid || a.frame != b.frame) ++lines_lost;
        for (double diff : {a.box.left() - b.box.left(), a.box.top() - b.box.top(), a.box.w() - b.box.w(),
                            a.box.h() - b.box.h(), a.conf - b.conf}) {
          worst = std::max(worst, std::abs(diff));
        }
      }
    }
  }

  long differing_arrays = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto p = ModelParams<float>::random(model_config(64, 2, 4, 31), seed);
    std::stringstream buf;
    save_checkpoint(buf, p);
    const auto q = load_checkpoint(buf, p.config);
    std::vector<const TensorF*> a;
    p.visit([&](const std::string&, const TensorF& t) { a.push_back(&t); });
    size_t i = 0;
    q.visit([&](const std::string&, const TensorF& t) {
      const TensorF& o = *a[i++];
      if (t.rows() != o.rows() || t.cols() != o.cols() ||
          std::memcmp(t.data(), o.data(), sizeof(float) * static_cast<size_t>(t.size())) != 0) {
        ++differing_arrays;
      }
    });
  }
  const bool pass = worst <= 1e-4 && lines_lost == 0 && differing_arrays == 0;
  return {pass, "MOT max field error " + fmt(worst) + ", " + std::to_string(lines_lost) +
                    " mismatched lines; checkpoint arrays differing " + std::to_string(differing_arrays)};
}

const std::map<int, std::pair<const char*, Outcome (*)()>> kCriteria{
    {1, {"gradient correctness", gradients}},
    {2, {"same-frame permutation equivariance", permutation}},
    {3, {"mask matches the earlier-frame rule", mask_rule}},
    {4, {"association oracles", association_oracle}},
    {5, {"hungarian optimality", hungarian_optimality}},
    {6, {"loss spot values", loss_values}},
    {7, {"synthetic end-to-end", end_to_end}},
    {8, {"re-entry keeps its id", reentry}},
    {9, {"gap histogram fidelity", gap_fidelity}},
    {10, {"round trips", round_trips}},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (!kCriteria.count(n)) {
      std::cerr << "usage: mottx_acceptance [criterion 1-10 ...]\n";
      return 2;
    }
    which.push_back(n);
  }
  if (which.empty())
    for (const auto& [n, c] : kCriteria) which.push_back(n);

  int failed = 0;
  for (int n : which) {
    const auto& [name, fn] = kCriteria.at(n);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << n << ' ' << name << ": " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
