#pragma once

namespace mottx {

/// Axis-aligned box in center form, pixel units. Width and height are
/// strictly positive; construction rejects anything else.
class BBox {
 public:
  BBox(double cx, double cy, double w, double h);

  static BBox from_ltwh(double left, double top, double w, double h);
  static BBox from_corners(double left, double top, double right, double bottom);

  double cx() const { return cx_; }
  double cy() const { return cy_; }
  double w() const { return w_; }
  double h() const { return h_; }

  double left() const { return cx_ - 0.5 * w_; }
  double top() const { return cy_ - 0.5 * h_; }
  double right() const { return cx_ + 0.5 * w_; }
  double bottom() const { return cy_ + 0.5 * h_; }
  double area() const { return w_ * h_; }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double cx_;
  double cy_;
  double w_;
  double h_;
};

/// Box with every field divided by the frame size and clamped to [0,1].
struct NormBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const NormBox&, const NormBox&) = default;
};

double iou(const BBox& a, const BBox& b);

/// IoU after moving both centers to the origin. Depends only on the sizes.
double iou_scale(const BBox& a, const BBox& b);

/// Height-modulated IoU: the IoU of the vertical extents times the plain IoU.
double hmiou(const BBox& a, const BBox& b);

NormBox normalize_box(const BBox& b, double frame_w, double frame_h);

}  // namespace mottx
