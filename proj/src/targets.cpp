#include "mottx/targets.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "mottx/errors.hpp"

namespace mottx {

std::vector<FramePairTargets> build_targets(const std::vector<std::vector<ClipObject>>& frames) {
  std::vector<FramePairTargets> out;
  // Most recent sequence index of every identity seen so far.
  std::unordered_map<int, int> latest;
  for (size_t t = 0; t < frames.size(); ++t) {
    if (t > 0) {
      FramePairTargets pair;
      pair.frame = static_cast<int>(t);
      for (size_t col = 0; col < frames[t].size(); ++col) {
        const ClipObject& obj = frames[t][col];
        pair.columns.push_back(obj.seq_index);
        if (auto it = latest.find(obj.tid); it != latest.end()) {
          pair.row_sources.push_back(it->second);
          pair.row_targets.push_back(static_cast<int>(col));
        }
      }
      out.push_back(std::move(pair));
    }
    for (const ClipObject& obj : frames[t]) latest[obj.tid] = obj.seq_index;
  }
  return out;
}

namespace {

template <typename Scalar>
Scalar loss_impl(const Tensor<Scalar>& z, std::span<const FramePairTargets> targets, Tensor<Scalar>* dz,
                 Scalar weight) {
  int contributing = 0;
  for (const auto& t : targets) contributing += t.rows() > 0 ? 1 : 0;
  if (contributing == 0) return Scalar(0);

  Scalar total = 0;
  for (const auto& t : targets) {
    if (t.rows() == 0) continue;
    const auto nr = static_cast<Eigen::Index>(t.rows());
    const auto nc = static_cast<Eigen::Index>(t.columns.size());
    Tensor<Scalar> zr(nr, z.cols());
    Tensor<Scalar> zc(nc, z.cols());
    for (Eigen::Index r = 0; r < nr; ++r) zr.row(r) = z.row(t.row_sources[static_cast<size_t>(r)]);
    for (Eigen::Index c = 0; c < nc; ++c) zc.row(c) = z.row(t.columns[static_cast<size_t>(c)]);
    Tensor<Scalar> logits = zr * zc.transpose();
    if (!logits.allFinite()) throw NumericError("clip_loss: non-finite logits");

    Scalar pair_loss = 0;
    for (Eigen::Index r = 0; r < nr; ++r) {
      const Scalar mx = logits.row(r).maxCoeff();
      logits.row(r).array() -= mx;
      const Scalar lse = std::log(logits.row(r).array().exp().sum());
      const auto label = static_cast<Eigen::Index>(t.row_targets[static_cast<size_t>(r)]);
      pair_loss += lse - logits(r, label);
      if (dz != nullptr) {
        // Reuse the row as softmax probabilities for the gradient.
        logits.row(r) = (logits.row(r).array() - lse).exp().matrix();
        logits(r, label) -= Scalar(1);
      }
    }
    total += pair_loss / static_cast<Scalar>(nr);

    if (dz != nullptr) {
      const Scalar g = weight / (static_cast<Scalar>(nr) * static_cast<Scalar>(contributing));
      const Tensor<Scalar> dlogits = logits * g;
      const Tensor<Scalar> dzr = dlogits * zc;
      const Tensor<Scalar> dzc = dlogits.transpose() * zr;
      for (Eigen::Index r = 0; r < nr; ++r) dz->row(t.row_sources[static_cast<size_t>(r)]) += dzr.row(r);
      for (Eigen::Index c = 0; c < nc; ++c) dz->row(t.columns[static_cast<size_t>(c)]) += dzc.row(c);
    }
  }
  return total / static_cast<Scalar>(contributing);
}

}  // namespace

template <typename Scalar>
Scalar clip_loss(const Tensor<Scalar>& embeddings, std::span<const FramePairTargets> targets) {
  return loss_impl<Scalar>(embeddings, targets, nullptr, Scalar(1));
}

template <typename Scalar>
Scalar clip_loss(const Tensor<Scalar>& embeddings, std::span<const FramePairTargets> targets,
                 Tensor<Scalar>& d_embeddings, Scalar weight) {
  if (d_embeddings.rows() != embeddings.rows() || d_embeddings.cols() != embeddings.cols()) {
    throw ShapeError("clip_loss: gradient buffer shape mismatch");
  }
  return loss_impl<Scalar>(embeddings, targets, &d_embeddings, weight);
}

template float clip_loss(const Tensor<float>&, std::span<const FramePairTargets>);
template double clip_loss(const Tensor<double>&, std::span<const FramePairTargets>);
template float clip_loss(const Tensor<float>&, std::span<const FramePairTargets>, Tensor<float>&, float);
template double clip_loss(const Tensor<double>&, std::span<const FramePairTargets>, Tensor<double>&, double);

}  // namespace mottx
