#include "mottx/patch_source.hpp"

namespace mottx {

void crop_patches(const FrameImage& img, std::span<const Detection> dets, TensorF& out) {
  out.resize(static_cast<Eigen::Index>(dets.size()), kRawPatchSize);
  for (size_t i = 0; i < dets.size(); ++i) {
    sample_patch(img, dets[i].box, std::span<float>(out.row(static_cast<Eigen::Index>(i)).data(), kRawPatchSize));
  }
}

void ImagePatchSource::patches(int frame, std::span<const Detection> dets, TensorF& out) const {
  if (dets.empty()) {
    out.resize(0, kRawPatchSize);
    return;
  }
  crop_patches(frames_(frame), dets, out);
}

}  // namespace mottx
