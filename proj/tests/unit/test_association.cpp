#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "mottx/association.hpp"
#include "mottx/geometry.hpp"
#include "mottx/hungarian.hpp"

using namespace mottx;

namespace {

BBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.0, 100.0);
  std::uniform_real_distribution<double> size(5.0, 40.0);
  return BBox(pos(rng), pos(rng), size(rng), size(rng));
}

// Best total over all injections of the smaller side into the larger.
double brute_force_max(const Eigen::MatrixXd& s) {
  const bool transpose = s.rows() > s.cols();
  const Eigen::MatrixXd m = transpose ? Eigen::MatrixXd(s.transpose()) : s;
  std::vector<int> cols(static_cast<size_t>(m.cols()));
  std::iota(cols.begin(), cols.end(), 0);
  double best = 0.0;
  // each permutation of columns assigns the first rows() columns to the rows
  do {
    double total = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) total += std::max(0.0, m(r, cols[static_cast<size_t>(r)]));
    best = std::max(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace

TEST_SUITE("association") {
  TEST_CASE("similarity hand example") {
    TensorD past(2, 2), cur(2, 2);
    past << 1, 0, 0, 1;
    cur << 1, 0, 0, 1;
    // identical sizes give an all-ones scale term; far apart last boxes give zero IoU
    const std::vector<BBox> pb{BBox(10, 10, 4, 4), BBox(50, 50, 4, 4)};
    const std::vector<BBox> cb{BBox(100, 100, 4, 4), BBox(200, 200, 4, 4)};
    const std::vector<BBox> last{BBox(500, 10, 4, 4), BBox(500, 80, 4, 4)};
    const Eigen::MatrixXd s = similarity(past, cur, pb, cb, last);
    const double e = std::exp(1.0);
    CHECK(s(0, 0) == doctest::Approx(e / (e + 1)).epsilon(1e-12));
    CHECK(s(0, 1) == doctest::Approx(1 / (e + 1)).epsilon(1e-12));
    CHECK(s(1, 0) == doctest::Approx(1 / (e + 1)).epsilon(1e-12));
    CHECK(s(1, 1) == doctest::Approx(e / (e + 1)).epsilon(1e-12));
    CHECK(std::abs(s(0, 0) - 0.7311) < 1e-4);
  }

  TEST_CASE("position term is added unscaled") {
    // centred boxes always overlap, so the scale term can only be checked
    // through the bound S >= I_position
    std::mt19937_64 rng(1);
    const TensorD past = TensorD::Random(3, 6), cur = TensorD::Random(2, 6);
    std::vector<BBox> pb, cb, last;
    for (int i = 0; i < 3; ++i) pb.push_back(random_box(rng)), last.push_back(random_box(rng));
    for (int j = 0; j < 2; ++j) cb.push_back(random_box(rng));
    const Eigen::MatrixXd s = similarity(past, cur, pb, cb, last);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 2; ++j) CHECK(s(i, j) >= iou(last[i], cb[j]));
    }
  }

  TEST_CASE("similarity matches a triple-loop oracle") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dim(1, 6);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = dim(rng), m = std::min(dim(rng), 5), d = dim(rng) + 2;
      TensorD past(n, d), cur(m, d);
      for (Eigen::Index i = 0; i < past.size(); ++i) past.data()[i] = g(rng);
      for (Eigen::Index i = 0; i < cur.size(); ++i) cur.data()[i] = g(rng);
      std::vector<BBox> pb, cb, last;
      for (int i = 0; i < n; ++i) pb.push_back(random_box(rng)), last.push_back(random_box(rng));
      for (int j = 0; j < m; ++j) cb.push_back(random_box(rng));
      const Eigen::MatrixXd s = similarity(past, cur, pb, cb, last);
      for (int i = 0; i < n; ++i) {
        std::vector<double> logit(static_cast<size_t>(m));
        for (int j = 0; j < m; ++j) {
          double dot = 0;
          for (int k = 0; k < d; ++k) dot += past(i, k) * cur(j, k);
          logit[j] = dot;
        }
        double z = 0;
        for (double l : logit) z += std::exp(l);
        for (int j = 0; j < m; ++j) {
          const double expected = std::exp(logit[j]) / z * iou_scale(pb[i], cb[j]) + iou(last[i], cb[j]);
          CHECK(std::abs(s(i, j) - expected) < 1e-6);
        }
      }
    }
  }

  TEST_CASE("empty inputs give empty matrices") {
    const std::vector<BBox> none;
    const std::vector<BBox> one{BBox(1, 1, 1, 1)};
    CHECK(similarity(TensorD(0, 4), TensorD(1, 4), none, one, none).size() == 0);
    CHECK(similarity(TensorD(1, 4), TensorD(0, 4), one, none, one).size() == 0);
  }

  TEST_CASE("affinity max-pools rows per trajectory") {
    Eigen::MatrixXd s(3, 2);
    s << 0.2, 0.5, 0.9, 0.1, 0.4, 0.4;
    const std::vector<int> singleton{0, 1, 2};
    CHECK(affinity(s, singleton, 3) == s);
    const std::vector<int> grouped{0, 0, 1};
    const Eigen::MatrixXd a = affinity(s, grouped, 2);
    CHECK(a(0, 0) == 0.9);
    CHECK(a(0, 1) == 0.5);
    CHECK(a(1, 0) == 0.4);
    const std::vector<int> orphan{0, 0, 0};
    CHECK_THROWS_AS(affinity(s, orphan, 2), std::invalid_argument);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
      const int k = 1 + static_cast<int>(rng() % 5);
      const int rows = k + static_cast<int>(rng() % 6);
      const int cols = 1 + static_cast<int>(rng() % 6);
      std::vector<int> owner(static_cast<size_t>(rows));
      for (int r = 0; r < rows; ++r) owner[r] = r < k ? r : static_cast<int>(rng() % k);
      std::shuffle(owner.begin(), owner.end(), rng);
      Eigen::MatrixXd m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
      const Eigen::MatrixXd got = affinity(m, owner, k);
      for (int t = 0; t < k; ++t) {
        for (int c = 0; c < cols; ++c) {
          double best = -1;
          for (int r = 0; r < rows; ++r)
            if (owner[r] == t) best = std::max(best, m(r, c));
          CHECK(got(t, c) == best);
        }
      }
    }
  }

  TEST_CASE("weights") {
    const BBox b(10, 10, 4, 8);
    const std::vector<BoxConfidence> t1{{b, 1.0}}, d1{{b, 1.0}};
    CHECK(weights(t1, d1)(0, 0) == doctest::Approx(1.0));
    const std::vector<BoxConfidence> far{{BBox(100, 100, 4, 8), 0.5}};
    const std::vector<BoxConfidence> t2{{b, 0.8}};
    CHECK(weights(t2, far, 0.0)(0, 0) == 0.0);
    CHECK(weights(t2, far, 0.05)(0, 0) == doctest::Approx(0.02).epsilon(1e-12));
    // floor only applies below it
    const std::vector<BoxConfidence> near{{BBox(11, 10, 4, 8), 1.0}};
    CHECK(weights(t1, near, 0.05)(0, 0) == doctest::Approx(hmiou(b, BBox(11, 10, 4, 8))));
  }

  TEST_CASE("hungarian hand examples") {
    Eigen::MatrixXd id(2, 2);
    id << 1, 0, 0, 1;
    auto a = hungarian_max(id);
    CHECK(a.matches == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});
    CHECK(assignment_total(id, a) == 2.0);

    Eigen::MatrixXd m(2, 2);
    m << 0.9, 0.2, 0.7, 0.6;
    a = hungarian_max(m);
    CHECK(a.matches == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});
    CHECK(assignment_total(m, a) == doctest::Approx(1.5));

    Eigen::MatrixXd r(2, 3);
    r << 0.1, 0.9, 0.3, 0.8, 0.2, 0.4;
    a = hungarian_max(r);
    CHECK(a.matches == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});
    CHECK(a.unmatched_cols == std::vector<int>{2});
    CHECK(a.unmatched_rows.empty());
  }

  TEST_CASE("hungarian drops pairs at or below the threshold") {
    Eigen::MatrixXd m(2, 2);
    m << 0.5, 0.0, 0.0, 1e-12;
    const auto a = hungarian_max(m, 1e-9);
    CHECK(a.matches == std::vector<std::pair<int, int>>{{0, 0}});
    CHECK(a.unmatched_rows == std::vector<int>{1});
    CHECK(a.unmatched_cols == std::vector<int>{1});
    Eigen::MatrixXd bad(1, 1);
    bad << std::nan("");
    CHECK_THROWS_AS(hungarian_max(bad), std::invalid_argument);
    CHECK(hungarian_max(Eigen::MatrixXd(0, 3)).unmatched_cols.size() == 3);
  }

  TEST_CASE("hungarian is optimal against enumeration") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
      const int rows = 1 + static_cast<int>(rng() % 7);
      const int cols = 1 + static_cast<int>(rng() % 7);
      Eigen::MatrixXd m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
      const auto a = hungarian_max(m, 0.0);
      std::set<int> used_r, used_c;
      for (auto [r, c] : a.matches) {
        CHECK(used_r.insert(r).second);
        CHECK(used_c.insert(c).second);
      }
      CHECK(a.matches.size() + a.unmatched_rows.size() == static_cast<size_t>(rows));
      CHECK(a.matches.size() + a.unmatched_cols.size() == static_cast<size_t>(cols));
      CHECK(std::abs(assignment_total(m, a) - brute_force_max(m)) < 1e-12);
    }
  }
}
