#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "csrnet/model.hpp"
#include "csrnet/rankeval.hpp"

namespace csrnet {

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

struct LossResult {
  double value = 0.0;
  std::vector<std::vector<double>> dprobs;  // per item, w.r.t. probs
};

// Cross-entropy averaged over the batch plus lambda * ||F||^2 summed over
// the conv filter banks only (biases, gamma/beta, embedding and dense
// weights are not regularized).
inline LossResult pointwise_loss(const std::vector<std::vector<double>>& probs,
                                 const std::vector<int>& labels, double lambda,
                                 const ModelParams& params) {
  const std::size_t N = probs.size();
  if (N == 0 || labels.size() != N) {
    throw contract_error("loss: batch and label sizes must match and be >= 1");
  }
  LossResult r;
  r.dprobs.assign(N, {0.0, 0.0});
  double ce = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const int y = labels[i];
    const double p = probs[i][static_cast<std::size_t>(y)];
    if (!(p > 0.0)) throw numeric_error("non-positive class probability");
    ce -= std::log(p);
    r.dprobs[i][static_cast<std::size_t>(y)] =
        -1.0 / (static_cast<double>(N) * p);
  }
  r.value = ce / static_cast<double>(N);
  if (lambda != 0.0) {
    double sq = 0.0;
    for (const ops::ConvBlockParams& blk : params.blocks) {
      for (double f : blk.F.v) sq += f * f;
    }
    r.value += lambda * sq;
  }
  return r;
}

// The regularizer's gradient contribution, 2*lambda*F, added where the loss
// is formed rather than inside the optimizer.
inline void add_l2_grad(const ModelParams& params, double lambda,
                        ModelParams& grads) {
  if (lambda == 0.0) return;
  for (std::size_t k = 0; k < params.blocks.size(); ++k) {
    const Tensor& F = params.blocks[k].F;
    Tensor& dF = grads.blocks[k].F;
    for (std::size_t j = 0; j < F.v.size(); ++j) {
      dF.v[j] += 2.0 * lambda * F.v[j];
    }
  }
}

// ---------------------------------------------------------------------------
// AdaDelta
// ---------------------------------------------------------------------------

struct AdaDeltaState {
  ModelParams acc_grad_sq;
  ModelParams acc_update_sq;
  double rho = 0.95;
  double eps = 1e-6;
};

inline AdaDeltaState make_adadelta(const ModelParams& params, double rho,
                                   double eps) {
  AdaDeltaState st;
  st.acc_grad_sq = zero_like(params);
  st.acc_update_sq = zero_like(params);
  st.rho = rho;
  st.eps = eps;
  return st;
}

// Per coordinate: E[g2] <- rho*E[g2] + (1-rho)*g^2;
// dx = -sqrt(E[dx2]+eps)/sqrt(E[g2]+eps) * g;
// E[dx2] <- rho*E[dx2] + (1-rho)*dx^2; x <- x + dx.
inline void adadelta_step(ModelParams& params, const ModelParams& grads,
                          AdaDeltaState& st) {
  std::vector<ParamSpan> xs = param_spans(params);
  std::vector<ParamSpan> gs = param_spans(const_cast<ModelParams&>(grads));
  std::vector<ParamSpan> eg = param_spans(st.acc_grad_sq);
  std::vector<ParamSpan> ex = param_spans(st.acc_update_sq);
  if (gs.size() != xs.size()) {
    throw contract_error("adadelta: gradient set incongruent with params");
  }
  for (std::size_t s = 0; s < xs.size(); ++s) {
    if (gs[s].size != xs[s].size || eg[s].size != xs[s].size ||
        ex[s].size != xs[s].size) {
      throw contract_error("adadelta: span size mismatch");
    }
    for (std::size_t i = 0; i < xs[s].size; ++i) {
      const double g = gs[s].data[i];
      double& Eg = eg[s].data[i];
      double& Ex = ex[s].data[i];
      Eg = st.rho * Eg + (1.0 - st.rho) * g * g;
      const double dx = -std::sqrt(Ex + st.eps) / std::sqrt(Eg + st.eps) * g;
      Ex = st.rho * Ex + (1.0 - st.rho) * dx * dx;
      xs[s].data[i] += dx;
    }
  }
}

// ---------------------------------------------------------------------------
// Early stopping
// ---------------------------------------------------------------------------

// Tracks the best value of a maximized metric over 1-based epochs; stops
// once `patience` consecutive epochs have passed without improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {
    if (patience < 1) throw config_error("patience must be >= 1");
  }

  // Returns true when this epoch sets a new best (strict improvement).
  bool observe(int epoch, double value) {
    if (epoch != last_epoch_ + 1) {
      throw contract_error("epochs must be observed consecutively from 1");
    }
    last_epoch_ = epoch;
    if (value > best_value_) {
      best_value_ = value;
      best_epoch_ = epoch;
      return true;
    }
    return false;
  }

  bool should_stop() const {
    return best_epoch_ > 0 && last_epoch_ - best_epoch_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }

 private:
  int patience_;
  int last_epoch_ = 0;
  int best_epoch_ = 0;
  double best_value_ = -std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochStats {
  double train_loss = 0.0;
  double dev_map = 0.0;
  double dev_mrr = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;  // epochs[k] is epoch k+1
  int best_epoch = 0;              // 1-based
};

struct TrainOptions {
  std::ostream* log = nullptr;  // per-epoch `epoch <k> loss ...` lines
  int record_batches = 0;       // capture the first k minibatch losses
  bool exact_bn_stats = false;  // recompute BN stats over the whole
                                // training set after training
};

struct TrainResult {
  ModelParams params;  // parameters of the best dev-MAP epoch
  TrainHistory history;
  std::vector<double> batch_losses;  // first record_batches losses
};

// One log line per epoch; also the line format of the training log file, so
// a log rebuilt from TrainHistory is byte-identical to the streamed one.
inline std::string format_epoch_line(int epoch, const EpochStats& stats) {
  char line[160];
  std::snprintf(line, sizeof(line),
                "epoch %d loss %.6f dev_map %.6f dev_mrr %.6f", epoch,
                stats.train_loss, stats.dev_map, stats.dev_mrr);
  return line;
}

namespace detail {

inline bool has_evaluable_question(const std::vector<EncodedPair>& pairs) {
  std::unordered_map<std::string, std::pair<bool, bool>> seen;  // pos, neg
  for (const EncodedPair& p : pairs) {
    auto& flags = seen[p.qid];
    (p.label == 1 ? flags.first : flags.second) = true;
    if (flags.first && flags.second) return true;
  }
  return false;
}

inline EvalReport eval_split(const ModelParams& params, const RunConfig& cfg,
                             const std::vector<EncodedPair>& pairs) {
  return evaluate(score_pairs(params, cfg, pairs, cfg.batch_size));
}

}  // namespace detail

// Replaces the EMA running stats with exact population statistics over
// `pairs`, one block at a time: block k's statistics are computed with
// blocks before k already frozen to their exact values, and both branches'
// activations feed the shared store.
inline void recompute_bn_stats(ModelParams& params, const RunConfig& cfg,
                               const std::vector<EncodedPair>& pairs) {
  if (!cfg.use_bn) return;
  if (pairs.empty()) throw contract_error("recompute_bn_stats: no pairs");
  const CharAlphabet& alphabet = build_alphabet();
  (void)alphabet;

  for (std::size_t k = 0; k < params.blocks.size(); ++k) {
    const int n = params.blocks[k].n_filters();
    std::vector<double> sum(static_cast<std::size_t>(n), 0.0);
    std::vector<double> sumsq(static_cast<std::size_t>(n), 0.0);
    long count = 0;

    auto accumulate = [&](const EncodedSentence& sent) {
      Tensor x = ops::embedding_forward(params.W, sent);
      // earlier blocks run in inference form with their final stats
      for (std::size_t j = 0; j < k; ++j) {
        const ops::ConvBlockParams& blk = params.blocks[j];
        Tensor t = ops::conv1d_forward(blk, x, ops::ConvMode::narrow);
        Tensor t3 = Tensor::zeros({1, t.shape[0], t.shape[1]});
        t3.v = t.v;
        Tensor y3 = ops::bn_forward_infer(t3, blk.gamma, blk.beta,
                                          blk.running_mean, blk.running_var,
                                          cfg.bn_eps);
        t.v = y3.v;
        ops::activation_inplace(cfg.activation, t.v.data(), t.v.size());
        x = std::move(t);
      }
      Tensor t = ops::conv1d_forward(params.blocks[k], x, ops::ConvMode::narrow);
      const int L = t.shape[1];
      for (int i = 0; i < n; ++i) {
        const double* row = t.row(i);
        double s = 0.0, sq = 0.0;
        for (int l = 0; l < L; ++l) {
          s += row[l];
          sq += row[l] * row[l];
        }
        sum[static_cast<std::size_t>(i)] += s;
        sumsq[static_cast<std::size_t>(i)] += sq;
      }
      count += L;
    };

    for (const EncodedPair& p : pairs) {
      accumulate(p.q);
      accumulate(p.a);
    }

    if (count < 2) throw contract_error("recompute_bn_stats: population < 2");
    for (int i = 0; i < n; ++i) {
      const double mean = sum[static_cast<std::size_t>(i)] / count;
      const double pop_var =
          sumsq[static_cast<std::size_t>(i)] / count - mean * mean;
      params.blocks[k].running_mean[static_cast<std::size_t>(i)] = mean;
      params.blocks[k].running_var[static_cast<std::size_t>(i)] =
          std::max(0.0, pop_var) * static_cast<double>(count) /
          static_cast<double>(count - 1);
    }
  }
}

// Pointwise training: seeded shuffle each epoch, minibatch forward/backward
// with AdaDelta updates, dev MAP after every epoch, early stopping with the
// configured patience, and a snapshot of the best epoch's parameters.
inline TrainResult train(const std::vector<EncodedPair>& train_pairs,
                         const std::vector<EncodedPair>& dev_pairs,
                         const RunConfig& cfg,
                         const TrainOptions& opts = {}) {
  validate_config(cfg);
  if (train_pairs.empty() || dev_pairs.empty()) {
    throw config_error("train and dev splits must be non-empty");
  }
  if (!detail::has_evaluable_question(dev_pairs)) {
    throw config_error(
        "dev split has no question with both a correct and an incorrect "
        "answer");
  }

  Rng rng(cfg.seed);
  ModelParams params = init_model(cfg, rng);
  AdaDeltaState ada = make_adadelta(params, cfg.adadelta_rho, cfg.adadelta_eps);
  EarlyStopper stopper(cfg.patience);

  TrainResult result;
  result.params = params;
  std::vector<std::size_t> order(train_pairs.size());
  std::iota(order.begin(), order.end(), 0);

  ForwardCache cache;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const EncodedPair*> batch;
      std::vector<int> labels;
      batch.reserve(stop - start);
      labels.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(&train_pairs[order[i]]);
        labels.push_back(train_pairs[order[i]].label);
      }

      forward_batch(params, cfg, batch, true, rng, cache);
      std::vector<std::vector<double>> probs;
      probs.reserve(batch.size());
      for (const ItemCache& it : cache.items) probs.push_back(it.probs);
      LossResult loss = pointwise_loss(probs, labels, cfg.lambda, params);

      ModelParams grads = zero_like(params);
      backward_batch(params, cfg, cache, loss.dprobs, grads);
      add_l2_grad(params, cfg.lambda, grads);
      update_running_stats(params, cfg, cache);
      adadelta_step(params, grads, ada);

      loss_sum += loss.value * static_cast<double>(batch.size());
      if (static_cast<int>(result.batch_losses.size()) < opts.record_batches) {
        result.batch_losses.push_back(loss.value);
      }
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(train_pairs.size());
    EvalReport dev = detail::eval_split(params, cfg, dev_pairs);
    stats.dev_map = dev.map;
    stats.dev_mrr = dev.mrr;
    result.history.epochs.push_back(stats);

    if (opts.log) {
      (*opts.log) << format_epoch_line(epoch, stats) << '\n';
    }

    if (stopper.observe(epoch, stats.dev_map)) {
      result.params = params;
      result.history.best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
  }

  if (opts.exact_bn_stats) {
    recompute_bn_stats(result.params, cfg, train_pairs);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Whole-model gradient check
// ---------------------------------------------------------------------------

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t n_checked = 0;
  // the worst coordinate, for diagnosing a failed check
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t worst_span = 0;
  std::size_t worst_index = 0;
};

// Central finite differences over every parameter of a tiny model against
// the analytic backward pass. The loss closure re-seeds its RNG so dropout
// masks are identical across evaluations. `tamper` is a test hook: it is
// applied to the analytic gradients before comparison so a deliberately
// broken gradient can be shown to trip the check.
inline GradCheckResult grad_check(
    const RunConfig& cfg, int batch, std::uint64_t seed, double h = 1e-5,
    const std::function<void(ModelParams&)>& tamper = nullptr) {
  validate_config(cfg);
  if (batch < 1) throw contract_error("grad_check: batch must be >= 1");

  Rng data_rng(seed);
  std::vector<EncodedPair> pairs;
  for (int i = 0; i < batch; ++i) {
    EncodedPair p;
    p.qid = "q" + std::to_string(i);
    p.aid = "a" + std::to_string(i);
    p.q.indices.resize(static_cast<std::size_t>(cfg.max_len_q));
    p.a.indices.resize(static_cast<std::size_t>(cfg.max_len_a));
    for (int& idx : p.q.indices) {
      idx = static_cast<int>(data_rng.below(CharAlphabet::kSize));
    }
    for (int& idx : p.a.indices) {
      idx = static_cast<int>(data_rng.below(CharAlphabet::kSize));
    }
    p.q.true_len = cfg.max_len_q;
    p.a.true_len = cfg.max_len_a;
    p.feats = {data_rng.uniform(), data_rng.uniform()};
    p.label = static_cast<int>(data_rng.below(2));
    pairs.push_back(std::move(p));
  }
  std::vector<const EncodedPair*> batch_ptrs;
  std::vector<int> labels;
  for (const EncodedPair& p : pairs) {
    batch_ptrs.push_back(&p);
    labels.push_back(p.label);
  }

  Rng init_rng(seed + 1);
  ModelParams params = init_model(cfg, init_rng);
  // Re-draw every parameter at a larger scale than the training init. At the
  // training scale many true gradients fall below the central-difference
  // noise floor (~1e-11 for a loss of order one at this step size), where the
  // relative-error quotient is dominated by roundoff rather than by the
  // backward pass under test. A generic O(1) operating point keeps gradient
  // magnitudes clear of that floor without touching h or the pass/fail bar.
  for (const ParamSpan& sp : param_spans(params)) {
    for (std::size_t i = 0; i < sp.size; ++i) {
      sp.data[i] = init_rng.uniform(-0.5, 0.5);
    }
  }
  for (ops::ConvBlockParams& blk : params.blocks) {
    for (double& g : blk.gamma) g = init_rng.uniform(0.5, 1.5);
  }
  const std::uint64_t forward_seed = seed + 2;

  auto loss_at = [&]() {
    Rng fwd_rng(forward_seed);
    ForwardCache c;
    forward_batch(params, cfg, batch_ptrs, true, fwd_rng, c);
    std::vector<std::vector<double>> probs;
    for (const ItemCache& it : c.items) probs.push_back(it.probs);
    return pointwise_loss(probs, labels, cfg.lambda, params).value;
  };

  // analytic gradients
  ModelParams grads = zero_like(params);
  {
    Rng fwd_rng(forward_seed);
    ForwardCache c;
    forward_batch(params, cfg, batch_ptrs, true, fwd_rng, c);
    std::vector<std::vector<double>> probs;
    for (const ItemCache& it : c.items) probs.push_back(it.probs);
    LossResult loss = pointwise_loss(probs, labels, cfg.lambda, params);
    backward_batch(params, cfg, c, loss.dprobs, grads);
    add_l2_grad(params, cfg.lambda, grads);
  }
  if (tamper) tamper(grads);

  GradCheckResult result;
  std::vector<ParamSpan> xs = param_spans(params);
  std::vector<ParamSpan> gs = param_spans(grads);
  for (std::size_t s = 0; s < xs.size(); ++s) {
    for (std::size_t i = 0; i < xs[s].size; ++i) {
      double& x = xs[s].data[i];
      const double saved = x;
      x = saved + h;
      const double up = loss_at();
      x = saved - h;
      const double down = loss_at();
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = gs[s].data[i];
      const double denom =
          std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(analytic - numeric) / denom;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
        result.worst_span = s;
        result.worst_index = i;
      }
      ++result.n_checked;
    }
  }
  return result;
}

}  // namespace csrnet
