#include "mottx/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mottx/errors.hpp"

namespace mottx {

FrameImage::FrameImage(int width, int height)
    : FrameImage(width, height, std::vector<float>(static_cast<size_t>(std::max(width, 0)) *
                                                   std::max(height, 0) * 3, 0.0f)) {}

FrameImage::FrameImage(int width, int height, std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("FrameImage: dimensions must be positive");
  }
  if (data_.size() != static_cast<size_t>(width) * height * 3) {
    throw std::invalid_argument("FrameImage: expected " + std::to_string(width * height * 3) +
                                " values, got " + std::to_string(data_.size()));
  }
}

void sample_patch(const FrameImage& img, const BBox& box, std::span<float> out) {
  if (out.size() != static_cast<size_t>(kRawPatchSize)) {
    throw std::invalid_argument("sample_patch: output must hold 12288 values");
  }
  const double W = img.width();
  const double H = img.height();
  if (box.right() <= 0.0 || box.left() >= W || box.bottom() <= 0.0 || box.top() >= H) {
    throw std::invalid_argument("sample_patch: box lies outside the image");
  }

  // Horizontal taps only depend on the column, vertical taps on the row.
  struct Tap {
    int lo;
    int hi;
    float frac;
  };
  auto taps = [](double origin, double extent, int size) {
    std::array<Tap, kPatchGrid> result{};
    for (int k = 0; k < kPatchGrid; ++k) {
      // Continuous coordinate where pixel centers sit on integers.
      double f = origin + (k + 0.5) * extent / kPatchGrid - 0.5;
      f = std::clamp(f, 0.0, static_cast<double>(size - 1));
      const int lo = static_cast<int>(std::floor(f));
      const int hi = std::min(lo + 1, size - 1);
      result[k] = Tap{lo, hi, static_cast<float>(f - lo)};
    }
    return result;
  };
  const auto xs = taps(box.left(), box.w(), img.width());
  const auto ys = taps(box.top(), box.h(), img.height());

  float* dst = out.data();
  for (int i = 0; i < kPatchGrid; ++i) {
    const Tap& ty = ys[i];
    for (int j = 0; j < kPatchGrid; ++j) {
      const Tap& tx = xs[j];
      for (int c = 0; c < kPatchChannels; ++c) {
        const float top = img.at(ty.lo, tx.lo, c) * (1.0f - tx.frac) + img.at(ty.lo, tx.hi, c) * tx.frac;
        const float bot = img.at(ty.hi, tx.lo, c) * (1.0f - tx.frac) + img.at(ty.hi, tx.hi, c) * tx.frac;
        *dst++ = top * (1.0f - ty.frac) + bot * ty.frac;
      }
    }
  }
}

std::vector<float> sample_patch(const FrameImage& img, const BBox& box) {
  std::vector<float> out(kRawPatchSize);
  sample_patch(img, box, out);
  return out;
}

template <typename Scalar>
Tensor<Scalar> embed(const Tensor<Scalar>& raw, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  if (raw.cols() != weight.cols() || bias.rows() != 1 || bias.cols() != weight.rows()) {
    throw ShapeError("embed: raw " + std::to_string(raw.cols()) + " columns vs weight " +
                     std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()) + ", bias " +
                     std::to_string(bias.cols()));
  }
  Tensor<Scalar> tokens = raw * weight.transpose();
  tokens.rowwise() += bias.row(0);
  return tokens;
}

template Tensor<float> embed(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> embed(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&);

}  // namespace mottx
