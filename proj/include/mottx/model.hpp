#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mottx/geometry.hpp"
#include "mottx/tensor.hpp"
#include "mottx/tokenizer.hpp"

namespace mottx {

inline constexpr int kBosFrame = -1;

struct ModelConfig {
  int d_model = 512;
  int n_layers = 6;
  int n_heads = 8;
  int ffn_dim = 0;  // 0 selects 4 * d_model
  int max_window = 129;
  double norm_eps = 1e-6;
  double dropout = 0.0;  // residual-branch dropout, training only

  int head_dim() const { return d_model / n_heads; }
  int ffn() const { return ffn_dim > 0 ? ffn_dim : 4 * d_model; }

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Per-token metadata of a model input. Row 0 is always <bos>.
struct SequenceLayout {
  std::vector<int> frame_index;  // window-relative, kBosFrame for <bos>
  std::vector<NormBox> boxes;    // zeros for <bos>
  std::vector<int> track_ids;    // -1 allowed

  /// Layout holding only the <bos> entry.
  static SequenceLayout with_bos();
  void push(int frame, const NormBox& box, int tid);

  size_t size() const { return frame_index.size(); }
  void validate() const;
};

template <typename Scalar>
struct TokenSequence {
  Tensor<Scalar> tokens;  // n x d_model, row 0 all zeros
  SequenceLayout layout;
};

template <typename Scalar>
struct LayerParams {
  Tensor<Scalar> attn_norm;
  Tensor<Scalar> wq, wk, wv, wo;
  Tensor<Scalar> bq, bk, bv, bo;
  Tensor<Scalar> ffn_norm;
  Tensor<Scalar> w1, b1, w2, b2;
};

/// All learnable arrays, including the patch embedding that feeds tokens.
/// Linear weights use the (out x in) convention.
template <typename Scalar>
struct ModelParams {
  ModelConfig config;
  Tensor<Scalar> embed_w;  // d_model x 12288
  Tensor<Scalar> embed_b;  // 1 x d_model
  std::vector<LayerParams<Scalar>> layers;
  Tensor<Scalar> final_norm;
  Tensor<Scalar> out_w;
  Tensor<Scalar> out_b;

  static ModelParams zeros(const ModelConfig& config);
  static ModelParams random(const ModelConfig& config, std::uint64_t seed);

  template <typename Fn>
  void visit(Fn&& fn) {
    visit_impl(*this, fn);
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    visit_impl(*this, fn);
  }

  size_t parameter_count() const;
  void set_zero();

  /// Checks every array against the config and for finiteness.
  void validate() const;

  template <typename Other>
  ModelParams<Other> cast() const;

 private:
  template <typename Self, typename Fn>
  static void visit_impl(Self& self, Fn& fn) {
    fn(std::string("embed.weight"), self.embed_w);
    fn(std::string("embed.bias"), self.embed_b);
    for (size_t i = 0; i < self.layers.size(); ++i) {
      auto& l = self.layers[i];
      const std::string p = "layers." + std::to_string(i) + ".";
      fn(std::string(p + "attn_norm.weight"), l.attn_norm);
      fn(std::string(p + "attn.q.weight"), l.wq);
      fn(std::string(p + "attn.q.bias"), l.bq);
      fn(std::string(p + "attn.k.weight"), l.wk);
      fn(std::string(p + "attn.k.bias"), l.bk);
      fn(std::string(p + "attn.v.weight"), l.wv);
      fn(std::string(p + "attn.v.bias"), l.bv);
      fn(std::string(p + "attn.o.weight"), l.wo);
      fn(std::string(p + "attn.o.bias"), l.bo);
      fn(std::string(p + "ffn_norm.weight"), l.ffn_norm);
      fn(std::string(p + "ffn.up.weight"), l.w1);
      fn(std::string(p + "ffn.up.bias"), l.b1);
      fn(std::string(p + "ffn.down.weight"), l.w2);
      fn(std::string(p + "ffn.down.bias"), l.b2);
    }
    fn(std::string("final_norm.weight"), self.final_norm);
    fn(std::string("out.weight"), self.out_w);
    fn(std::string("out.bias"), self.out_b);
  }
};

/// Frame-causal attention mask: token i may attend to token j iff j belongs
/// to a strictly earlier frame, or j == i. <bos> (frame -1) is earlier than
/// every frame.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(std::span<const int> frame_index);

  size_t size() const { return n_; }
  bool allowed(size_t i, size_t j) const { return j < frame_start_[i] || j == i; }
  /// Tokens [0, prefix(i)) are all visible to token i.
  size_t prefix(size_t i) const { return frame_start_[i]; }

 private:
  size_t n_ = 0;
  std::vector<size_t> frame_start_;
};

/// Dense boolean form of the frame-causal mask, true = attention allowed.
std::vector<std::vector<bool>> build_frame_causal_mask(std::span<const int> frame_index);

/// Interleaved sin/cos encoding with base 10000 at position `frame_index`.
/// The <bos> sentinel yields zeros.
std::vector<double> temporal_encoding(int frame_index, int d_model);

/// Each of (cx, cy, w, h) encoded into d_model/4 interleaved sin/cos values
/// of coordinate * 2pi with base 20, concatenated in that order.
std::vector<double> spatial_encoding(const NormBox& box, int d_model);

struct DropoutPlan {
  double rate = 0.0;
  std::uint64_t seed = 0;
};

template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct LayerCache {
  Tensor<Scalar> x_in;
  ColVector<Scalar> inv_rms1;
  Tensor<Scalar> h1, u, q, k, v;
  std::vector<Tensor<Scalar>> attn;  // one n x n matrix per head
  Tensor<Scalar> concat;
  Tensor<Scalar> attn_drop;  // empty when dropout is off
  Tensor<Scalar> x_mid;
  ColVector<Scalar> inv_rms2;
  Tensor<Scalar> h2, pre, act;
  Tensor<Scalar> ffn_drop;
};

template <typename Scalar>
struct ForwardCache {
  AttentionMask mask;
  Tensor<Scalar> spatial;
  std::vector<LayerCache<Scalar>> layers;
  Tensor<Scalar> x_last;
  ColVector<Scalar> inv_rms_final;
  Tensor<Scalar> h_final;
};

/// Runs the decoder stack and returns one output embedding per input token.
template <typename Scalar>
Tensor<Scalar> forward(const ModelParams<Scalar>& params, const TokenSequence<Scalar>& seq);

/// Same as above, retaining the activations needed by backward().
template <typename Scalar>
Tensor<Scalar> forward(const ModelParams<Scalar>& params, const TokenSequence<Scalar>& seq,
                       ForwardCache<Scalar>& cache, const DropoutPlan& dropout = {});

/// Accumulates parameter gradients for upstream gradient `d_out` into
/// `grads` (which must be shaped like `params`). When `d_tokens` is non-null
/// it receives the gradient with respect to the input tokens.
template <typename Scalar>
void backward(const ModelParams<Scalar>& params, const TokenSequence<Scalar>& seq,
              const ForwardCache<Scalar>& cache, const Tensor<Scalar>& d_out, ModelParams<Scalar>& grads,
              Tensor<Scalar>* d_tokens = nullptr);

/// Tokens for a sequence: a zero <bos> row followed by embed(raw).
template <typename Scalar>
Tensor<Scalar> tokens_from_raw(const ModelParams<Scalar>& params, const Tensor<Scalar>& raw);

}  // namespace mottx
