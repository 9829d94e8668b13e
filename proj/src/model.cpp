#include "mottx/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "mottx/errors.hpp"

namespace mottx {

void ModelConfig::validate() const {
  if (d_model < 1 || n_layers < 1 || n_heads < 1 || max_window < 1 || ffn() < 1) {
    throw std::invalid_argument("ModelConfig: all counts must be >= 1");
  }
  if (d_model % n_heads != 0) {
    throw std::invalid_argument("ModelConfig: d_model " + std::to_string(d_model) +
                                " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (d_model % 4 != 0) {
    throw std::invalid_argument("ModelConfig: d_model must be divisible by 4 for the box encoding");
  }
  if (!(norm_eps > 0.0)) throw std::invalid_argument("ModelConfig: norm_eps must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("ModelConfig: dropout must be in [0,1)");
}

SequenceLayout SequenceLayout::with_bos() {
  SequenceLayout layout;
  layout.push(kBosFrame, NormBox{}, -1);
  return layout;
}

void SequenceLayout::push(int frame, const NormBox& box, int tid) {
  frame_index.push_back(frame);
  boxes.push_back(box);
  track_ids.push_back(tid);
}

void SequenceLayout::validate() const {
  if (frame_index.empty() || frame_index[0] != kBosFrame) {
    throw std::invalid_argument("SequenceLayout: first token must be <bos>");
  }
  if (boxes.size() != frame_index.size() || track_ids.size() != frame_index.size()) {
    throw std::invalid_argument("SequenceLayout: field lengths differ");
  }
  for (size_t i = 1; i < frame_index.size(); ++i) {
    if (frame_index[i] < 0) throw std::invalid_argument("SequenceLayout: only <bos> may use frame -1");
    if (frame_index[i] < frame_index[i - 1]) {
      throw std::invalid_argument("SequenceLayout: frame_index must be non-decreasing");
    }
  }
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

template <typename Scalar>
LayerParams<Scalar> zero_layer(const ModelConfig& c) {
  const int d = c.d_model;
  const int f = c.ffn();
  LayerParams<Scalar> l;
  l.attn_norm = Tensor<Scalar>::Zero(1, d);
  l.wq = Tensor<Scalar>::Zero(d, d);
  l.wk = Tensor<Scalar>::Zero(d, d);
  l.wv = Tensor<Scalar>::Zero(d, d);
  l.wo = Tensor<Scalar>::Zero(d, d);
  l.bq = Tensor<Scalar>::Zero(1, d);
  l.bk = Tensor<Scalar>::Zero(1, d);
  l.bv = Tensor<Scalar>::Zero(1, d);
  l.bo = Tensor<Scalar>::Zero(1, d);
  l.ffn_norm = Tensor<Scalar>::Zero(1, d);
  l.w1 = Tensor<Scalar>::Zero(f, d);
  l.b1 = Tensor<Scalar>::Zero(1, f);
  l.w2 = Tensor<Scalar>::Zero(d, f);
  l.b2 = Tensor<Scalar>::Zero(1, d);
  return l;
}

bool is_norm_gain(const std::string& name) {
  return name.find("norm.weight") != std::string::npos;
}

}  // namespace

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  const int d = config.d_model;
  p.embed_w = Tensor<Scalar>::Zero(d, kRawPatchSize);
  p.embed_b = Tensor<Scalar>::Zero(1, d);
  for (int i = 0; i < config.n_layers; ++i) p.layers.push_back(zero_layer<Scalar>(config));
  p.final_norm = Tensor<Scalar>::Zero(1, d);
  p.out_w = Tensor<Scalar>::Zero(d, d);
  p.out_b = Tensor<Scalar>::Zero(1, d);
  return p;
}

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::random(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = zeros(config);
  std::mt19937_64 rng(seed);
  p.visit([&](const std::string& name, Tensor<Scalar>& t) {
    if (is_norm_gain(name)) {
      t.setOnes();
      return;
    }
    if (t.rows() == 1) return;  // biases start at zero
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(dist(rng));
  });
  return p;
}

template <typename Scalar>
size_t ModelParams<Scalar>::parameter_count() const {
  size_t n = 0;
  visit([&](const std::string&, const Tensor<Scalar>& t) { n += static_cast<size_t>(t.size()); });
  return n;
}

template <typename Scalar>
void ModelParams<Scalar>::set_zero() {
  visit([](const std::string&, Tensor<Scalar>& t) { t.setZero(); });
}

template <typename Scalar>
void ModelParams<Scalar>::validate() const {
  config.validate();
  if (static_cast<int>(layers.size()) != config.n_layers) {
    throw ShapeError("ModelParams: expected " + std::to_string(config.n_layers) + " layers, found " +
                     std::to_string(layers.size()));
  }
  const ModelParams reference = zeros(config);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  reference.visit([&](const std::string&, const Tensor<Scalar>& t) { shapes.emplace_back(t.rows(), t.cols()); });
  size_t i = 0;
  visit([&](const std::string& name, const Tensor<Scalar>& t) {
    if (t.rows() != shapes[i].first || t.cols() != shapes[i].second) {
      throw ShapeError("ModelParams: " + name + " has shape " + std::to_string(t.rows()) + "x" +
                       std::to_string(t.cols()) + ", expected " + std::to_string(shapes[i].first) + "x" +
                       std::to_string(shapes[i].second));
    }
    if (!t.allFinite()) throw NumericError("ModelParams: " + name + " contains non-finite values");
    ++i;
  });
}

template <typename Scalar>
template <typename Other>
ModelParams<Other> ModelParams<Scalar>::cast() const {
  ModelParams<Other> out = ModelParams<Other>::zeros(config);
  std::vector<const Tensor<Scalar>*> src;
  visit([&](const std::string&, const Tensor<Scalar>& t) { src.push_back(&t); });
  size_t i = 0;
  out.visit([&](const std::string&, Tensor<Other>& t) { t = src[i++]->template cast<Other>(); });
  return out;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

// ---------------------------------------------------------------------------
// Mask and encodings

AttentionMask::AttentionMask(std::span<const int> frame_index) : n_(frame_index.size()), frame_start_(n_) {
  for (size_t i = 0; i < n_; ++i) {
    if (i > 0 && frame_index[i] < frame_index[i - 1]) {
      throw std::invalid_argument("AttentionMask: frame_index must be non-decreasing");
    }
    frame_start_[i] = (i > 0 && frame_index[i] == frame_index[i - 1]) ? frame_start_[i - 1] : i;
  }
}

std::vector<std::vector<bool>> build_frame_causal_mask(std::span<const int> frame_index) {
  const AttentionMask mask(frame_index);
  std::vector<std::vector<bool>> dense(mask.size(), std::vector<bool>(mask.size(), false));
  for (size_t i = 0; i < mask.size(); ++i) {
    for (size_t j = 0; j < mask.size(); ++j) dense[i][j] = mask.allowed(i, j);
  }
  return dense;
}

namespace {

// Interleaved sinusoid: even slots sin, odd slots cos, frequency shared by
// each (sin, cos) pair.
void sinusoid(double position, int dims, double base, double* out) {
  for (int k = 0; k < dims; ++k) {
    const int pair = k / 2;
    const double angle = position / std::pow(base, 2.0 * pair / dims);
    out[k] = (k % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
}

}  // namespace

std::vector<double> temporal_encoding(int frame_index, int d_model) {
  std::vector<double> enc(static_cast<size_t>(d_model), 0.0);
  if (frame_index < 0) return enc;
  sinusoid(static_cast<double>(frame_index), d_model, 10000.0, enc.data());
  return enc;
}

std::vector<double> spatial_encoding(const NormBox& box, int d_model) {
  if (d_model % 4 != 0) throw std::invalid_argument("spatial_encoding: d_model must be divisible by 4");
  const int q = d_model / 4;
  std::vector<double> enc(static_cast<size_t>(d_model), 0.0);
  const double coords[4] = {box.cx, box.cy, box.w, box.h};
  for (int c = 0; c < 4; ++c) {
    sinusoid(coords[c] * 2.0 * std::numbers::pi, q, 20.0, enc.data() + c * q);
  }
  return enc;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

template <typename Scalar>
void check_sequence(const ModelParams<Scalar>& params, const TokenSequence<Scalar>& seq) {
  const ModelConfig& c = params.config;
  seq.layout.validate();
  const auto n = static_cast<Eigen::Index>(seq.layout.size());
  if (seq.tokens.rows() != n || seq.tokens.cols() != c.d_model) {
    throw ShapeError("forward: tokens are " + std::to_string(seq.tokens.rows()) + "x" +
                     std::to_string(seq.tokens.cols()) + ", layout has " + std::to_string(n) +
                     " entries and d_model is " + std::to_string(c.d_model));
  }
  const int first = seq.layout.size() > 1 ? seq.layout.frame_index[1] : 0;
  const int span = seq.layout.frame_index.back() - first + 1;
  if (span > c.max_window) {
    throw ShapeError("forward: sequence spans " + std::to_string(span) + " frames, max_window is " +
                     std::to_string(c.max_window));
  }
  if (static_cast<int>(params.layers.size()) != c.n_layers) {
    throw ShapeError("forward: parameter set does not match config");
  }
}

template <typename Scalar>
Tensor<Scalar> encoding_matrix(const SequenceLayout& layout, int d_model, bool spatial) {
  Tensor<Scalar> m = Tensor<Scalar>::Zero(static_cast<Eigen::Index>(layout.size()), d_model);
  for (size_t i = 1; i < layout.size(); ++i) {
    const auto enc = spatial ? spatial_encoding(layout.boxes[i], d_model)
                             : temporal_encoding(layout.frame_index[i], d_model);
    for (int k = 0; k < d_model; ++k) m(static_cast<Eigen::Index>(i), k) = static_cast<Scalar>(enc[k]);
  }
  return m;
}

template <typename Scalar>
void rms_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gain, Scalar eps, Tensor<Scalar>& y,
              ColVector<Scalar>& inv_rms) {
  const Scalar d = static_cast<Scalar>(x.cols());
  inv_rms = ((x.array().square().rowwise().sum() / d) + eps).rsqrt().matrix();
  y = (x.array().colwise() * inv_rms.array()).rowwise() * gain.row(0).array();
}

// dx for y = x * inv_rms * gain; accumulates dgain.
template <typename Scalar>
Tensor<Scalar> rms_norm_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& gain, const ColVector<Scalar>& inv_rms,
                                 const Tensor<Scalar>& dy, Tensor<Scalar>& dgain) {
  const Scalar d = static_cast<Scalar>(x.cols());
  dgain.row(0) += ((dy.array() * x.array()).matrix().transpose() * inv_rms).transpose();
  const Tensor<Scalar> gd = (dy.array().rowwise() * gain.row(0).array()).matrix();
  const ColVector<Scalar> dot = (gd.array() * x.array()).rowwise().sum().matrix();
  const ColVector<Scalar> coef = (dot.array() * inv_rms.array().cube() / d).matrix();
  Tensor<Scalar> dx = (gd.array().colwise() * inv_rms.array()).matrix();
  dx -= (x.array().colwise() * coef.array()).matrix();
  return dx;
}

template <typename Scalar>
void linear(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& b, Tensor<Scalar>& y) {
  y.noalias() = x * w.transpose();
  y.rowwise() += b.row(0);
}

template <typename Scalar>
Tensor<Scalar> linear_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& dy,
                               Tensor<Scalar>& dw, Tensor<Scalar>& db) {
  dw.noalias() += dy.transpose() * x;
  db += dy.colwise().sum();
  return dy * w;
}

template <typename Scalar>
Scalar sigmoid(Scalar a) {
  return Scalar(1) / (Scalar(1) + std::exp(-a));
}

template <typename Scalar>
Tensor<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  Tensor<Scalar> m(rows, cols);
  std::bernoulli_distribution keep(1.0 - rate);
  const Scalar scale = static_cast<Scalar>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : Scalar(0);
  return m;
}

template <typename Scalar>
Tensor<Scalar> run(const ModelParams<Scalar>& params, const TokenSequence<Scalar>& seq, ForwardCache<Scalar>& cache,
                   const DropoutPlan& dropout) {
  check_sequence(params, seq);
  const ModelConfig& c = params.config;
  const auto n = static_cast<Eigen::Index>(seq.layout.size());
  const int hd = c.head_dim();
  const Scalar scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(hd)));
  const Scalar eps = static_cast<Scalar>(c.norm_eps);
  const bool use_dropout = dropout.rate > 0.0;
  std::mt19937_64 rng(dropout.seed);

  cache.mask = AttentionMask(seq.layout.frame_index);
  cache.spatial = encoding_matrix<Scalar>(seq.layout, c.d_model, true);
  cache.layers.resize(static_cast<size_t>(c.n_layers));

  Tensor<Scalar> x = seq.tokens + encoding_matrix<Scalar>(seq.layout, c.d_model, false);
  Tensor<Scalar> y;
  for (int li = 0; li < c.n_layers; ++li) {
    const LayerParams<Scalar>& p = params.layers[static_cast<size_t>(li)];
    LayerCache<Scalar>& lc = cache.layers[static_cast<size_t>(li)];

    lc.x_in = x;
    rms_norm(x, p.attn_norm, eps, lc.h1, lc.inv_rms1);
    lc.u = lc.h1 + cache.spatial;
    linear(lc.h1, p.wq, p.bq, lc.q);
    linear(lc.u, p.wk, p.bk, lc.k);
    linear(lc.u, p.wv, p.bv, lc.v);

    lc.concat.resize(n, c.d_model);
    lc.attn.resize(static_cast<size_t>(c.n_heads));
    for (int h = 0; h < c.n_heads; ++h) {
      const auto qh = lc.q.middleCols(h * hd, hd);
      const auto kh = lc.k.middleCols(h * hd, hd);
      Tensor<Scalar>& a = lc.attn[static_cast<size_t>(h)];
      a.noalias() = (qh * kh.transpose()) * scale;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto pre = static_cast<Eigen::Index>(cache.mask.prefix(static_cast<size_t>(i)));
        Scalar mx = a(i, i);
        for (Eigen::Index j = 0; j < pre; ++j) mx = std::max(mx, a(i, j));
        Scalar sum = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j < pre || j == i) {
            a(i, j) = std::exp(a(i, j) - mx);
            sum += a(i, j);
          } else {
            a(i, j) = 0;
          }
        }
        a.row(i) /= sum;
      }
      lc.concat.middleCols(h * hd, hd).noalias() = a * lc.v.middleCols(h * hd, hd);
    }
    linear(lc.concat, p.wo, p.bo, y);
    if (use_dropout) {
      lc.attn_drop = dropout_mask<Scalar>(n, c.d_model, dropout.rate, rng);
      y.array() *= lc.attn_drop.array();
    } else {
      lc.attn_drop.resize(0, 0);
    }
    x += y;
    lc.x_mid = x;

    rms_norm(x, p.ffn_norm, eps, lc.h2, lc.inv_rms2);
    linear(lc.h2, p.w1, p.b1, lc.pre);
    lc.act = lc.pre.unaryExpr([](Scalar a) { return a * sigmoid(a); });
    linear(lc.act, p.w2, p.b2, y);
    if (use_dropout) {
      lc.ffn_drop = dropout_mask<Scalar>(n, c.d_model, dropout.rate, rng);
      y.array() *= lc.ffn_drop.array();
    } else {
      lc.ffn_drop.resize(0, 0);
    }
    x += y;
  }

  cache.x_last = x;
  rms_norm(x, params.final_norm, eps, cache.h_final, cache.inv_rms_final);
  Tensor<Scalar> out;
  linear(cache.h_final, params.out_w, params.out_b, out);
  if (!out.allFinite()) throw NumericError("forward: non-finite output embeddings");
  return out;
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> forward(const ModelParams<Scalar>& params, const TokenSequence<Scalar>& seq) {
  ForwardCache<Scalar> cache;
  return run(params, seq, cache, DropoutPlan{});
}

template <typename Scalar>
Tensor<Scalar> forward(const ModelParams<Scalar>& params, const TokenSequence<Scalar>& seq, ForwardCache<Scalar>& cache,
                       const DropoutPlan& dropout) {
  return run(params, seq, cache, dropout);
}

template <typename Scalar>
void backward(const ModelParams<Scalar>& params, const TokenSequence<Scalar>& seq, const ForwardCache<Scalar>& cache,
              const Tensor<Scalar>& d_out, ModelParams<Scalar>& grads, Tensor<Scalar>* d_tokens) {
  const ModelConfig& c = params.config;
  const auto n = static_cast<Eigen::Index>(seq.layout.size());
  if (d_out.rows() != n || d_out.cols() != c.d_model) throw ShapeError("backward: d_out shape mismatch");
  const int hd = c.head_dim();
  const Scalar scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(hd)));

  Tensor<Scalar> dh = linear_backward(cache.h_final, params.out_w, d_out, grads.out_w, grads.out_b);
  Tensor<Scalar> dx = rms_norm_backward(cache.x_last, params.final_norm, cache.inv_rms_final, dh, grads.final_norm);

  for (int li = c.n_layers - 1; li >= 0; --li) {
    const LayerParams<Scalar>& p = params.layers[static_cast<size_t>(li)];
    LayerParams<Scalar>& g = grads.layers[static_cast<size_t>(li)];
    const LayerCache<Scalar>& lc = cache.layers[static_cast<size_t>(li)];

    // FFN branch.
    Tensor<Scalar> dy = dx;
    if (lc.ffn_drop.size() > 0) dy.array() *= lc.ffn_drop.array();
    Tensor<Scalar> dact = linear_backward(lc.act, p.w2, dy, g.w2, g.b2);
    const Tensor<Scalar> dpre = dact.binaryExpr(lc.pre, [](Scalar da, Scalar a) {
      const Scalar s = sigmoid(a);
      return da * s * (Scalar(1) + a * (Scalar(1) - s));
    });
    Tensor<Scalar> dh2 = linear_backward(lc.h2, p.w1, dpre, g.w1, g.b1);
    dx += rms_norm_backward(lc.x_mid, p.ffn_norm, lc.inv_rms2, dh2, g.ffn_norm);

    // Attention branch.
    dy = dx;
    if (lc.attn_drop.size() > 0) dy.array() *= lc.attn_drop.array();
    const Tensor<Scalar> dconcat = linear_backward(lc.concat, p.wo, dy, g.wo, g.bo);
    Tensor<Scalar> dq(n, c.d_model), dk(n, c.d_model), dv(n, c.d_model);
    for (int h = 0; h < c.n_heads; ++h) {
      const Tensor<Scalar>& a = lc.attn[static_cast<size_t>(h)];
      const auto d_head = dconcat.middleCols(h * hd, hd);
      const Tensor<Scalar> da = d_head * lc.v.middleCols(h * hd, hd).transpose();
      dv.middleCols(h * hd, hd).noalias() = a.transpose() * d_head;
      const ColVector<Scalar> row_dot = (da.array() * a.array()).rowwise().sum().matrix();
      const Tensor<Scalar> ds = ((da.array().colwise() - row_dot.array()) * a.array()).matrix() * scale;
      dq.middleCols(h * hd, hd).noalias() = ds * lc.k.middleCols(h * hd, hd);
      dk.middleCols(h * hd, hd).noalias() = ds.transpose() * lc.q.middleCols(h * hd, hd);
    }
    Tensor<Scalar> dh1 = linear_backward(lc.h1, p.wq, dq, g.wq, g.bq);
    dh1 += linear_backward(lc.u, p.wk, dk, g.wk, g.bk);
    dh1 += linear_backward(lc.u, p.wv, dv, g.wv, g.bv);
    dx += rms_norm_backward(lc.x_in, p.attn_norm, lc.inv_rms1, dh1, g.attn_norm);
  }
  if (d_tokens != nullptr) *d_tokens = std::move(dx);
}

template <typename Scalar>
Tensor<Scalar> tokens_from_raw(const ModelParams<Scalar>& params, const Tensor<Scalar>& raw) {
  Tensor<Scalar> tokens = Tensor<Scalar>::Zero(raw.rows() + 1, params.config.d_model);
  if (raw.rows() > 0) tokens.bottomRows(raw.rows()) = embed(raw, params.embed_w, params.embed_b);
  return tokens;
}

template Tensor<float> forward(const ModelParams<float>&, const TokenSequence<float>&);
template Tensor<double> forward(const ModelParams<double>&, const TokenSequence<double>&);
template Tensor<float> forward(const ModelParams<float>&, const TokenSequence<float>&, ForwardCache<float>&,
                               const DropoutPlan&);
template Tensor<double> forward(const ModelParams<double>&, const TokenSequence<double>&, ForwardCache<double>&,
                                const DropoutPlan&);
template void backward(const ModelParams<float>&, const TokenSequence<float>&, const ForwardCache<float>&,
                       const Tensor<float>&, ModelParams<float>&, Tensor<float>*);
template void backward(const ModelParams<double>&, const TokenSequence<double>&, const ForwardCache<double>&,
                       const Tensor<double>&, ModelParams<double>&, Tensor<double>*);
template Tensor<float> tokens_from_raw(const ModelParams<float>&, const Tensor<float>&);
template Tensor<double> tokens_from_raw(const ModelParams<double>&, const Tensor<double>&);

}  // namespace mottx
