#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <vector>

#include "mottx/synth.hpp"

using namespace mottx;

namespace {

SceneConfig small_scene(std::uint64_t seed, bool render = false) {
  SceneConfig c;
  c.width = 320;
  c.height = 240;
  c.num_objects = 5;
  c.num_frames = 30;
  c.render = render;
  c.seed = seed;
  return c;
}

bool has_tid(const std::vector<Detection>& frame, int tid) {
  for (const auto& d : frame)
    if (d.tid == tid) return true;
  return false;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("generation is deterministic") {
    const Scene a = generate(small_scene(4, true));
    const Scene b = generate(small_scene(4, true));
    REQUIRE(a.ground_truth().size() == b.ground_truth().size());
    for (size_t f = 0; f < a.ground_truth().size(); ++f) {
      REQUIRE(a.ground_truth()[f].size() == b.ground_truth()[f].size());
      for (size_t i = 0; i < a.ground_truth()[f].size(); ++i) {
        CHECK(a.ground_truth()[f][i].box == b.ground_truth()[f][i].box);
        CHECK(a.ground_truth()[f][i].tid == b.ground_truth()[f][i].tid);
      }
    }
    const auto ia = a.render(7), ib = b.render(7);
    CHECK(std::equal(ia.data().begin(), ia.data().end(), ib.data().begin()));
    const Scene c = generate(small_scene(5));
    CHECK_FALSE(c.ground_truth()[3][0].box == a.ground_truth()[3][0].box);
  }

  TEST_CASE("object count gives that many identities") {
    const Scene s = generate(small_scene(1));
    std::set<int> tids;
    for (const auto& f : s.ground_truth())
      for (const auto& d : f) {
        tids.insert(d.tid);
        CHECK(d.x == d.tid - 1);
        CHECK(d.box.left() >= -1e-9);
        CHECK(d.box.right() <= 320 + 1e-9);
      }
    CHECK(tids == std::set<int>{1, 2, 3, 4, 5});
  }

  TEST_CASE("occlusion and re-entry windows hide the object") {
    SceneConfig c = small_scene(2);
    c.occlusions = {{2, 10, 7}};
    c.reentries = {{4, 5, 3}};
    const Scene s = generate(c);
    CHECK(has_tid(s.ground_truth(9), 2));
    for (int f = 10; f <= 16; ++f) CHECK_FALSE(has_tid(s.ground_truth(f), 2));
    CHECK(has_tid(s.ground_truth(17), 2));
    CHECK(has_tid(s.ground_truth(4), 4));
    for (int f = 5; f <= 7; ++f) CHECK_FALSE(has_tid(s.ground_truth(f), 4));
    CHECK(has_tid(s.ground_truth(8), 4));
  }

  TEST_CASE("rendered frames hold the canvas size and valid values") {
    const Scene s = generate(small_scene(3, true));
    const FrameImage img = s.render(1);
    CHECK(img.width() == 320);
    CHECK(img.height() == 240);
    for (float v : img.data()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
    CHECK(s.base_appearance(0).size() == static_cast<size_t>(kRawPatchSize));
  }

  TEST_CASE("appearance bank is deterministic and separates objects") {
    const Scene s = generate(small_scene(6));
    const AppearanceBank bank(s);
    std::vector<float> a(kRawPatchSize), b(kRawPatchSize), c(kRawPatchSize);
    bank.appearance(1, 4, a);
    bank.appearance(1, 4, b);
    CHECK(a == b);
    bank.appearance(2, 4, c);
    double same = 0, diff = 0;
    bank.appearance(1, 5, b);
    for (int k = 0; k < kRawPatchSize; ++k) {
      same += std::abs(a[k] - b[k]);
      diff += std::abs(a[k] - c[k]);
    }
    CHECK(same < diff);
    bank.appearance(-3, 4, c);  // clutter keys are valid
    for (float v : c) CHECK((v >= 0.0f && v <= 1.0f));
  }

  TEST_CASE("zero noise is the identity apart from tids") {
    const Scene s = generate(small_scene(7));
    const auto d = corrupt(s.ground_truth(), NoiseConfig{}, 320, 240);
    REQUIRE(d.size() == s.ground_truth().size());
    for (size_t f = 0; f < d.size(); ++f) {
      REQUIRE(d[f].size() == s.ground_truth()[f].size());
      std::map<double, BBox> by_key;
      for (const auto& g : s.ground_truth()[f]) by_key.emplace(g.x, g.box);
      for (const auto& det : d[f]) {
        CHECK(det.tid == kUnassigned);
        CHECK(det.conf == 1.0);
        CHECK(det.box == by_key.at(det.x));
      }
    }
    NoiseConfig all_missed;
    all_missed.fn_rate = 1.0;
    for (const auto& f : corrupt(s.ground_truth(), all_missed, 320, 240)) CHECK(f.empty());
  }

  TEST_CASE("box jitter matches the half-normal expectation") {
    SceneConfig c = small_scene(8);
    c.num_frames = 100;
    const Scene s = generate(c);
    NoiseConfig n;
    n.box_sigma = 2.0;
    n.seed = 1;
    const auto d = corrupt(s.ground_truth(), n, 320, 240);
    double total = 0;
    long count = 0;
    for (size_t f = 0; f < d.size(); ++f) {
      std::map<double, BBox> by_key;
      for (const auto& g : s.ground_truth()[f]) by_key.emplace(g.x, g.box);
      for (const auto& det : d[f]) {
        const BBox& g = by_key.at(det.x);
        total += std::abs(det.box.cx() - g.cx()) + std::abs(det.box.cy() - g.cy());
        count += 2;
      }
    }
    const double mean = total / count;
    const double expected = 2.0 * std::sqrt(2.0 / std::numbers::pi);
    CHECK(mean >= 1.2);
    CHECK(mean <= 2.0);
    CHECK(std::abs(mean - expected) < 0.15);
  }

  TEST_CASE("false positives carry clutter keys and low confidence") {
    SceneConfig c = small_scene(9);
    c.num_frames = 100;
    const Scene s = generate(c);
    NoiseConfig n;
    n.fp_rate = 0.2;
    n.conf_sigma = 0.1;
    n.seed = 2;
    const auto d = corrupt(s.ground_truth(), n, 320, 240);
    double fp_conf = 0, tp_conf = 0;
    long fps = 0, tps = 0;
    for (const auto& f : d) {
      for (const auto& det : f) {
        if (det.x < 0) {
          fp_conf += det.conf;
          ++fps;
          CHECK(det.conf >= n.fp_conf_min);
          CHECK(det.conf <= n.fp_conf_max);
        } else {
          tp_conf += det.conf;
          ++tps;
        }
      }
    }
    CHECK(fps > 50);
    CHECK(tps == 500);
    CHECK(fp_conf / fps < tp_conf / tps);
  }

  TEST_CASE("invalid configs are rejected") {
    SceneConfig c = small_scene(1);
    c.occlusions = {{9, 5, 2}};
    CHECK_THROWS_AS(generate(c), std::invalid_argument);
    c = small_scene(1);
    c.occlusions = {{1, 25, 10}};
    CHECK_THROWS_AS(generate(c), std::invalid_argument);
    c = small_scene(1);
    c.occlusions = {{1, 5, 5}, {1, 8, 2}};
    CHECK_THROWS_AS(generate(c), std::invalid_argument);
    c = small_scene(1);
    c.max_box_w = 1000;
    CHECK_THROWS_AS(generate(c), std::invalid_argument);
    NoiseConfig n;
    n.fp_rate = -0.1;
    CHECK_THROWS_AS(n.validate(), std::invalid_argument);
    n = NoiseConfig{};
    n.fp_conf_min = 0.8;
    n.fp_conf_max = 0.2;
    CHECK_THROWS_AS(n.validate(), std::invalid_argument);
  }
}
