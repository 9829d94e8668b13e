#pragma once

#include <functional>
#include <span>

#include "mottx/detection.hpp"
#include "mottx/tensor.hpp"
#include "mottx/tokenizer.hpp"

namespace mottx {

/// Supplies raw 12288-long patch vectors for the detections of one frame,
/// either cropped from images or taken from precomputed appearance vectors.
class PatchSource {
 public:
  virtual ~PatchSource() = default;

  virtual int frame_width() const = 0;
  virtual int frame_height() const = 0;

  /// Resizes `out` to dets.size() x 12288 and fills one row per detection.
  virtual void patches(int frame, std::span<const Detection> dets, TensorF& out) const = 0;
};

/// Crops patches from frames produced on demand by a callback.
class ImagePatchSource : public PatchSource {
 public:
  using FrameFn = std::function<FrameImage(int frame)>;

  ImagePatchSource(int width, int height, FrameFn frames)
      : width_(width), height_(height), frames_(std::move(frames)) {}

  int frame_width() const override { return width_; }
  int frame_height() const override { return height_; }
  void patches(int frame, std::span<const Detection> dets, TensorF& out) const override;

 private:
  int width_;
  int height_;
  FrameFn frames_;
};

/// Crops every detection box from one image.
void crop_patches(const FrameImage& img, std::span<const Detection> dets, TensorF& out);

}  // namespace mottx
