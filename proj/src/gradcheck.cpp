#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "mottx/errors.hpp"
#include "mottx/objective.hpp"

namespace mottx {

namespace {

template <typename Scalar>
Scalar clip_forward_backward(const TrainingSample<Scalar>& sample, const ModelParams<Scalar>& params,
                             ModelParams<Scalar>& grads, Scalar weight, const DropoutPlan& dropout) {
  TokenSequence<Scalar> seq{tokens_from_raw(params, sample.raw), sample.layout};
  ForwardCache<Scalar> cache;
  const Tensor<Scalar> z = forward(params, seq, cache, dropout);
  Tensor<Scalar> dz = Tensor<Scalar>::Zero(z.rows(), z.cols());
  const Scalar loss = clip_loss<Scalar>(z, sample.targets, dz, weight);
  const bool any_rows =
      std::any_of(sample.targets.begin(), sample.targets.end(), [](const auto& t) { return t.rows() > 0; });
  if (!any_rows) return loss;

  Tensor<Scalar> d_tokens;
  backward(params, seq, cache, dz, grads, &d_tokens);
  const Eigen::Index n_raw = sample.raw.rows();
  if (n_raw > 0) {
    const auto d_obj = d_tokens.bottomRows(n_raw);
    grads.embed_w.noalias() += d_obj.transpose() * sample.raw;
    grads.embed_b += d_obj.colwise().sum();
  }
  return loss;
}

template <typename Scalar>
void add_into(ModelParams<Scalar>& dst, const ModelParams<Scalar>& src) {
  std::vector<const Tensor<Scalar>*> parts;
  src.visit([&](const std::string&, const Tensor<Scalar>& t) { parts.push_back(&t); });
  size_t i = 0;
  dst.visit([&](const std::string&, Tensor<Scalar>& t) { t += *parts[i++]; });
}

}  // namespace

template <typename Scalar>
Scalar loss_and_gradients(std::span<const TrainingSample<Scalar>> batch, const ModelParams<Scalar>& params,
                          ModelParams<Scalar>& grads, const LossOptions& options) {
  if (grads.layers.size() != params.layers.size() || grads.embed_w.size() != params.embed_w.size()) {
    grads = ModelParams<Scalar>::zeros(params.config);
  } else {
    grads.set_zero();
  }
  if (batch.empty()) return Scalar(0);
  const Scalar weight = Scalar(1) / static_cast<Scalar>(batch.size());
  auto plan_for = [&](size_t i) {
    DropoutPlan plan = options.dropout;
    plan.seed += static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ULL;
    return plan;
  };

  std::vector<Scalar> losses(batch.size(), Scalar(0));
  const int threads = std::clamp<int>(options.threads, 1, static_cast<int>(batch.size()));
  if (threads == 1) {
    for (size_t i = 0; i < batch.size(); ++i) {
      losses[i] = clip_forward_backward(batch[i], params, grads, weight, plan_for(i));
    }
  } else {
    // Each clip gets its own buffer; buffers are summed in clip order so the
    // result does not depend on scheduling.
    std::vector<ModelParams<Scalar>> partial(batch.size());
    std::atomic<size_t> next{0};
    std::vector<std::exception_ptr> errors(batch.size());
    auto worker = [&] {
      for (size_t i = next++; i < batch.size(); i = next++) {
        try {
          partial[i] = ModelParams<Scalar>::zeros(params.config);
          losses[i] = clip_forward_backward(batch[i], params, partial[i], weight, plan_for(i));
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (const auto& p : partial) add_into(grads, p);
  }

  Scalar total = 0;
  for (Scalar l : losses) total += l;
  total *= weight;
  if (!std::isfinite(static_cast<double>(total))) throw NumericError("loss_and_gradients: non-finite loss");
  return total;
}

template <typename Scalar>
Scalar batch_loss(std::span<const TrainingSample<Scalar>> batch, const ModelParams<Scalar>& params) {
  if (batch.empty()) return Scalar(0);
  Scalar total = 0;
  for (const auto& sample : batch) {
    TokenSequence<Scalar> seq{tokens_from_raw(params, sample.raw), sample.layout};
    total += clip_loss<Scalar>(forward(params, seq), sample.targets);
  }
  return total / static_cast<Scalar>(batch.size());
}

template float loss_and_gradients(std::span<const TrainingSample<float>>, const ModelParams<float>&,
                                  ModelParams<float>&, const LossOptions&);
template double loss_and_gradients(std::span<const TrainingSample<double>>, const ModelParams<double>&,
                                   ModelParams<double>&, const LossOptions&);
template float batch_loss(std::span<const TrainingSample<float>>, const ModelParams<float>&);
template double batch_loss(std::span<const TrainingSample<double>>, const ModelParams<double>&);

// ---------------------------------------------------------------------------

namespace {

TrainingSample<double> random_clip(const GradCheckOptions& o, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TrainingSample<double> s;
  s.layout = SequenceLayout::with_bos();
  std::vector<std::vector<ClipObject>> frames(static_cast<size_t>(o.frames));
  int next_new_tid = o.objects_per_frame;
  for (int f = 0; f < o.frames; ++f) {
    std::vector<int> tids;
    for (int k = 0; k < o.objects_per_frame; ++k) tids.push_back(k);
    // Replace the last identity after the first frame so every rule fires:
    // a continuing track, an ending track and a newborn.
    if (f > 0 && o.objects_per_frame > 1) tids.back() = next_new_tid++;
    std::shuffle(tids.begin(), tids.end(), rng);
    for (int tid : tids) {
      const int index = static_cast<int>(s.layout.size());
      NormBox box{unit(rng), unit(rng), 0.05 + 0.3 * unit(rng), 0.05 + 0.3 * unit(rng)};
      s.layout.push(f, box, tid);
      frames[static_cast<size_t>(f)].push_back(ClipObject{tid, index});
    }
  }
  s.targets = build_targets(frames);
  s.raw = TensorD(static_cast<Eigen::Index>(s.layout.size() - 1), kRawPatchSize);
  for (Eigen::Index i = 0; i < s.raw.size(); ++i) s.raw.data()[i] = unit(rng);
  return s;
}

ModelParams<double> jittered_params(const ModelConfig& config, std::mt19937_64& rng) {
  ModelParams<double> p = ModelParams<double>::random(config, rng());
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  p.visit([&](const std::string&, TensorD& t) {
    if (t.rows() != 1) return;
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += jitter(rng);
  });
  return p;
}

}  // namespace

GradCheckReport gradient_check(const GradCheckOptions& o) {
  o.config.validate();
  std::mt19937_64 rng(o.seed);
  const TrainingSample<double> sample = random_clip(o, rng);
  ModelParams<double> params = jittered_params(o.config, rng);

  ModelParams<double> grads;
  GradCheckReport report;
  report.loss = loss_and_gradients<double>(std::span(&sample, 1), params, grads);

  const Eigen::Index n_raw = sample.raw.rows();
  TensorD tokens = tokens_from_raw(params, sample.raw);
  auto loss_at = [&](const TensorD& toks) {
    TokenSequence<double> seq{toks, sample.layout};
    return clip_loss<double>(forward(params, seq), sample.targets);
  };
  // Recompute the embedding output column affected by a perturbed
  // embedding weight or bias entry.
  auto recompute_column = [&](TensorD& toks, Eigen::Index r) {
    if (n_raw == 0) return;
    toks.col(r).tail(n_raw) = sample.raw * params.embed_w.row(r).transpose();
    toks.col(r).tail(n_raw).array() += params.embed_b(0, r);
  };

  std::vector<TensorD*> analytic;
  grads.visit([&](const std::string&, TensorD& t) { analytic.push_back(&t); });
  size_t index = 0;
  params.visit([&](const std::string& name, TensorD& t) {
    const TensorD& g = *analytic[index++];
    const bool embed_weight = (&t == &params.embed_w);
    const bool embed_bias = (&t == &params.embed_b);
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        const double a = g(i, j);
        if (!(std::abs(a) > o.min_grad)) {
          ++report.skipped;
          continue;
        }
        const double saved = t(i, j);
        const Eigen::Index col = embed_weight ? i : j;
        auto central = [&](double h) {
          double lp = 0.0;
          double lm = 0.0;
          if (embed_weight || embed_bias) {
            TensorD toks = tokens;
            t(i, j) = saved + h;
            recompute_column(toks, col);
            lp = loss_at(toks);
            t(i, j) = saved - h;
            recompute_column(toks, col);
            lm = loss_at(toks);
          } else {
            t(i, j) = saved + h;
            lp = loss_at(tokens);
            t(i, j) = saved - h;
            lm = loss_at(tokens);
          }
          t(i, j) = saved;
          return (lp - lm) / (2.0 * h);
        };
        double numeric = central(o.step);
        if (o.richardson) numeric = (4.0 * central(0.5 * o.step) - numeric) / 3.0;
        const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
        ++report.checked;
        if (rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_param = name + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
        }
        if (!(rel < o.rel_tol)) ++report.failures;
      }
    }
  });
  return report;
}

}  // namespace mottx
