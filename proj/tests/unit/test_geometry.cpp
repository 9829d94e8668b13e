#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "mottx/geometry.hpp"

using namespace mottx;

namespace {

// Fraction of a fine pixel grid covered by both boxes over the fraction
// covered by either.
double raster_iou(const BBox& a, const BBox& b) {
  const double x0 = std::min(a.left(), b.left());
  const double x1 = std::max(a.right(), b.right());
  const double y0 = std::min(a.top(), b.top());
  const double y1 = std::max(a.bottom(), b.bottom());
  const int n = 200;
  long both = 0, either = 0;
  for (int i = 0; i < n; ++i) {
    const double y = y0 + (i + 0.5) * (y1 - y0) / n;
    for (int j = 0; j < n; ++j) {
      const double x = x0 + (j + 0.5) * (x1 - x0) / n;
      const bool in_a = x >= a.left() && x < a.right() && y >= a.top() && y < a.bottom();
      const bool in_b = x >= b.left() && x < b.right() && y >= b.top() && y < b.bottom();
      both += in_a && in_b;
      either += in_a || in_b;
    }
  }
  return either ? static_cast<double>(both) / either : 0.0;
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("boxes reject non-positive or non-finite sizes") {
    CHECK_THROWS_AS(BBox(0, 0, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(BBox(0, 0, 1, -2), std::invalid_argument);
    CHECK_THROWS_AS(BBox(NAN, 0, 1, 1), std::invalid_argument);
    CHECK_NOTHROW(BBox(-5, -5, 0.5, 0.5));
  }

  TEST_CASE("corner form round-trips") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-100, 100), s(0.1, 50);
    for (int i = 0; i < 100; ++i) {
      const BBox b(u(rng), u(rng), s(rng), s(rng));
      const BBox c = BBox::from_corners(b.left(), b.top(), b.right(), b.bottom());
      CHECK(c.cx() == doctest::Approx(b.cx()).epsilon(1e-9));
      CHECK(c.cy() == doctest::Approx(b.cy()).epsilon(1e-9));
      CHECK(std::abs(c.w() - b.w()) < 1e-6);
      CHECK(std::abs(c.h() - b.h()) < 1e-6);
      const BBox d = BBox::from_ltwh(b.left(), b.top(), b.w(), b.h());
      CHECK(std::abs(d.cx() - b.cx()) < 1e-6);
    }
  }

  TEST_CASE("iou examples") {
    const BBox a(0, 0, 2, 2);
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(BBox(0, 0, 2, 2), BBox(100, 100, 2, 2)) == 0.0);
    CHECK(iou(BBox(0, 0, 2, 2), BBox(1, 1, 2, 2)) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  }

  TEST_CASE("iou_scale examples") {
    CHECK(iou_scale(BBox(3, 4, 5, 6), BBox(-30, 40, 5, 6)) == 1.0);
    CHECK(iou_scale(BBox(0, 0, 2, 2), BBox(9, 9, 4, 4)) == doctest::Approx(0.25));
    CHECK(iou_scale(BBox(0, 0, 2, 4), BBox(0, 0, 4, 2)) == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("hmiou examples") {
    const BBox a(0, 0, 2, 2);
    CHECK(hmiou(a, a) == 1.0);
    // Vertical extents [0,2] and [1,3], horizontally apart.
    CHECK(hmiou(BBox(0, 1, 2, 2), BBox(10, 2, 2, 2)) == 0.0);
    CHECK(hmiou(BBox(0, 0, 2, 2), BBox(0, 1, 2, 2)) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  }

  TEST_CASE("normalize_box examples") {
    const NormBox n = normalize_box(BBox(50, 50, 10, 10), 100, 100);
    CHECK(n.cx == doctest::Approx(0.5));
    CHECK(n.cy == doctest::Approx(0.5));
    CHECK(n.w == doctest::Approx(0.1));
    CHECK(n.h == doctest::Approx(0.1));
    CHECK(normalize_box(BBox(0, 0, 10, 10), 100, 100).cx == 0.0);
    CHECK(normalize_box(BBox(-5, 0, 10, 10), 100, 100).cx == 0.0);
    CHECK(normalize_box(BBox(200, 50, 10, 10), 100, 100).cx == 1.0);
    CHECK(normalize_box(BBox(50, 50, 400, 10), 100, 100).w == 1.0);
    CHECK_THROWS_AS(normalize_box(BBox(1, 1, 1, 1), 0, 100), std::invalid_argument);
    CHECK_THROWS_AS(normalize_box(BBox(1, 1, 1, 1), 100, -1), std::invalid_argument);
  }

  TEST_CASE("symmetry, range, translation invariance and hmiou <= iou") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> c(0, 20), s(0.5, 10), shift(-100, 100);
    for (int i = 0; i < 1000; ++i) {
      const BBox a(c(rng), c(rng), s(rng), s(rng));
      const BBox b(c(rng), c(rng), s(rng), s(rng));
      CHECK(iou(a, b) == iou(b, a));
      CHECK(iou_scale(a, b) == iou_scale(b, a));
      CHECK(hmiou(a, b) == hmiou(b, a));
      for (double v : {iou(a, b), iou_scale(a, b), hmiou(a, b)}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      CHECK(hmiou(a, b) <= iou(a, b));
      const BBox a2(a.cx() + shift(rng), a.cy() + shift(rng), a.w(), a.h());
      CHECK(iou_scale(a2, b) == iou_scale(a, b));
    }
  }

  TEST_CASE("iou agrees with a rasterized estimate") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> c(0, 10), s(1, 8);
    for (int i = 0; i < 1000; ++i) {
      const BBox a(c(rng), c(rng), s(rng), s(rng));
      const BBox b(c(rng), c(rng), s(rng), s(rng));
      CHECK(std::abs(iou(a, b) - raster_iou(a, b)) < 0.02);
    }
  }
}
