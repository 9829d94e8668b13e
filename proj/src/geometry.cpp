#include "mottx/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mottx {

BBox::BBox(double cx, double cy, double w, double h) : cx_(cx), cy_(cy), w_(w), h_(h) {
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) || !std::isfinite(h)) {
    throw std::invalid_argument("BBox: non-finite coordinate");
  }
  if (!(w > 0.0) || !(h > 0.0)) {
    throw std::invalid_argument("BBox: width and height must be positive, got " +
                                std::to_string(w) + "x" + std::to_string(h));
  }
}

BBox BBox::from_ltwh(double left, double top, double w, double h) {
  return BBox(left + 0.5 * w, top + 0.5 * h, w, h);
}

BBox BBox::from_corners(double left, double top, double right, double bottom) {
  return BBox(0.5 * (left + right), 0.5 * (top + bottom), right - left, bottom - top);
}

namespace {

double overlap_1d(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

double iou(const BBox& a, const BBox& b) {
  const double iw = overlap_1d(a.left(), a.right(), b.left(), b.right());
  const double ih = overlap_1d(a.top(), a.bottom(), b.top(), b.bottom());
  const double inter = iw * ih;
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_scale(const BBox& a, const BBox& b) {
  const double inter = std::min(a.w(), b.w()) * std::min(a.h(), b.h());
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double hmiou(const BBox& a, const BBox& b) {
  const double inter_h = overlap_1d(a.top(), a.bottom(), b.top(), b.bottom());
  if (inter_h <= 0.0) return 0.0;
  const double union_h = std::max(a.bottom(), b.bottom()) - std::min(a.top(), b.top());
  return (inter_h / union_h) * iou(a, b);
}

NormBox normalize_box(const BBox& b, double frame_w, double frame_h) {
  if (!(frame_w > 0.0) || !(frame_h > 0.0)) {
    throw std::invalid_argument("normalize_box: frame dimensions must be positive");
  }
  return NormBox{std::clamp(b.cx() / frame_w, 0.0, 1.0), std::clamp(b.cy() / frame_h, 0.0, 1.0),
                 std::clamp(b.w() / frame_w, 0.0, 1.0), std::clamp(b.h() / frame_h, 0.0, 1.0)};
}

}  // namespace mottx
