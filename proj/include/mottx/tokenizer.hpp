#pragma once

#include <span>
#include <vector>

#include "mottx/geometry.hpp"
#include "mottx/tensor.hpp"

namespace mottx {

inline constexpr int kPatchGrid = 64;
inline constexpr int kPatchChannels = 3;
inline constexpr int kRawPatchSize = kPatchGrid * kPatchGrid * kPatchChannels;

/// Interleaved RGB frame, row-major H x W x 3, values in [0,1].
class FrameImage {
 public:
  FrameImage(int width, int height);
  FrameImage(int width, int height, std::vector<float> data);

  int width() const { return width_; }
  int height() const { return height_; }

  float at(int y, int x, int c) const { return data_[(static_cast<size_t>(y) * width_ + x) * 3 + c]; }
  float& at(int y, int x, int c) { return data_[(static_cast<size_t>(y) * width_ + x) * 3 + c]; }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

 private:
  int width_;
  int height_;
  std::vector<float> data_;
};

/// Sample a 64x64 grid of cell centers inside `box` with bilinear
/// interpolation between pixel centers. Samples falling outside the image use
/// edge-clamped coordinates. Output layout is (row, column, channel).
///
/// Throws std::invalid_argument if the box does not overlap the image.
void sample_patch(const FrameImage& img, const BBox& box, std::span<float> out);
std::vector<float> sample_patch(const FrameImage& img, const BBox& box);

/// Linear token projection: token = raw * weight^T + bias.
/// `weight` is d_model x 12288, `bias` is 1 x d_model.
template <typename Scalar>
Tensor<Scalar> embed(const Tensor<Scalar>& raw, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias);

}  // namespace mottx
