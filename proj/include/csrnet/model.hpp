#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "csrnet/alphabet.hpp"
#include "csrnet/dataio.hpp"
#include "csrnet/errors.hpp"
#include "csrnet/features.hpp"
#include "csrnet/nn_ops.hpp"
#include "csrnet/rankeval.hpp"
#include "csrnet/rng.hpp"
#include "csrnet/tensor.hpp"

namespace csrnet {

// The two word-level features appended at the join: plain overlap and
// IDF-weighted overlap.
inline constexpr int kNumFeatures = 2;

struct ConvSpec {
  int width = 0;
  int n_filters = 0;

  bool operator==(const ConvSpec&) const = default;
};

struct RunConfig {
  int embed_dim = 50;
  std::vector<ConvSpec> conv_blocks = {{3, 128}, {5, 32}};
  int hidden_dim = 100;
  double dropout_rate = 0.0;
  bool use_bn = true;
  ops::Activation activation = ops::Activation::relu;
  int max_len_q = 192;
  int max_len_a = 386;
  double lambda = 5e-4;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  int batch_size = 64;
  int patience = 5;
  int max_epochs = 50;
  std::uint64_t seed = 1;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
};

// Shortest question/answer length the narrow conv stack can digest.
inline int min_sentence_len(const RunConfig& cfg) {
  int shrink = 0;
  for (const ConvSpec& b : cfg.conv_blocks) shrink += b.width - 1;
  return shrink + 1;
}

inline int join_dim(const RunConfig& cfg) {
  return 2 * cfg.conv_blocks.back().n_filters + kNumFeatures;
}

inline void validate_config(const RunConfig& cfg) {
  if (cfg.embed_dim < 1) throw config_error("embed_dim must be >= 1");
  if (cfg.conv_blocks.empty()) {
    throw config_error("at least one conv block is required");
  }
  for (const ConvSpec& b : cfg.conv_blocks) {
    if (b.width < 1 || b.n_filters < 1) {
      throw config_error("conv block widths and filter counts must be >= 1");
    }
  }
  if (cfg.hidden_dim < 1) throw config_error("hidden_dim must be >= 1");
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0) {
    throw config_error("dropout_rate must be in [0, 1)");
  }
  const int need = min_sentence_len(cfg);
  if (cfg.max_len_q < need || cfg.max_len_a < need) {
    throw config_error("max_len_q/max_len_a must be >= " +
                       std::to_string(need) +
                       " for this conv stack");
  }
  if (cfg.lambda < 0.0) throw config_error("lambda must be >= 0");
  if (cfg.adadelta_rho <= 0.0 || cfg.adadelta_rho >= 1.0) {
    throw config_error("adadelta_rho must be in (0, 1)");
  }
  if (cfg.adadelta_eps <= 0.0) throw config_error("adadelta_eps must be > 0");
  if (cfg.batch_size < 1) throw config_error("batch_size must be >= 1");
  if (cfg.patience < 1) throw config_error("patience must be >= 1");
  if (cfg.max_epochs < 1) throw config_error("max_epochs must be >= 1");
  if (cfg.bn_eps <= 0.0) throw config_error("bn_eps must be > 0");
  if (cfg.bn_momentum <= 0.0 || cfg.bn_momentum > 1.0) {
    throw config_error("bn_momentum must be in (0, 1]");
  }
}

// All learnable parameters plus the BN running statistics. Both branches
// read the same storage — weight sharing is structural, not copied.
struct ModelParams {
  Tensor W;  // embed_dim x |alphabet|
  std::vector<ops::ConvBlockParams> blocks;
  Tensor Wh;  // hidden_dim x join_dim
  std::vector<double> bh;
  Tensor Wo;  // 2 x hidden_dim
  std::vector<double> bo;
};

// Weight matrices draw uniform(-0.05, 0.05) in a fixed order (W, then each
// block's filters, then Wh, then Wo) so a seed pins every parameter bit.
inline ModelParams init_model(const RunConfig& cfg, Rng& rng) {
  validate_config(cfg);
  ModelParams p;
  p.W = Tensor::zeros({cfg.embed_dim, CharAlphabet::kSize});
  for (double& x : p.W.v) x = rng.uniform(-0.05, 0.05);

  int in_channels = cfg.embed_dim;
  for (const ConvSpec& spec : cfg.conv_blocks) {
    ops::ConvBlockParams blk;
    blk.F = Tensor::zeros({spec.n_filters, in_channels, spec.width});
    for (double& x : blk.F.v) x = rng.uniform(-0.05, 0.05);
    blk.b.assign(static_cast<std::size_t>(spec.n_filters), 0.0);
    blk.gamma.assign(static_cast<std::size_t>(spec.n_filters), 1.0);
    blk.beta.assign(static_cast<std::size_t>(spec.n_filters), 0.0);
    blk.running_mean.assign(static_cast<std::size_t>(spec.n_filters), 0.0);
    blk.running_var.assign(static_cast<std::size_t>(spec.n_filters), 1.0);
    p.blocks.push_back(std::move(blk));
    in_channels = spec.n_filters;
  }

  p.Wh = Tensor::zeros({cfg.hidden_dim, join_dim(cfg)});
  for (double& x : p.Wh.v) x = rng.uniform(-0.05, 0.05);
  p.bh.assign(static_cast<std::size_t>(cfg.hidden_dim), 0.0);
  p.Wo = Tensor::zeros({2, cfg.hidden_dim});
  for (double& x : p.Wo.v) x = rng.uniform(-0.05, 0.05);
  p.bo.assign(2, 0.0);
  return p;
}

// A gradient set (or optimizer accumulator) shaped like the parameters,
// zero-filled. Running stats are carried but never treated as gradients.
inline ModelParams zero_like(const ModelParams& p) {
  ModelParams z;
  z.W = Tensor::zeros(p.W.shape);
  for (const ops::ConvBlockParams& blk : p.blocks) {
    ops::ConvBlockParams zb;
    zb.F = Tensor::zeros(blk.F.shape);
    zb.b.assign(blk.b.size(), 0.0);
    zb.gamma.assign(blk.gamma.size(), 0.0);
    zb.beta.assign(blk.beta.size(), 0.0);
    zb.running_mean.assign(blk.running_mean.size(), 0.0);
    zb.running_var.assign(blk.running_var.size(), 0.0);
    z.blocks.push_back(std::move(zb));
  }
  z.Wh = Tensor::zeros(p.Wh.shape);
  z.bh.assign(p.bh.size(), 0.0);
  z.Wo = Tensor::zeros(p.Wo.shape);
  z.bo.assign(p.bo.size(), 0.0);
  return z;
}

// Contiguous views over every learnable array, in a fixed order. Running
// stats are excluded: they are statistics, not parameters.
struct ParamSpan {
  double* data;
  std::size_t size;
};

inline std::vector<ParamSpan> param_spans(ModelParams& p) {
  std::vector<ParamSpan> s;
  s.push_back({p.W.v.data(), p.W.v.size()});
  for (ops::ConvBlockParams& blk : p.blocks) {
    s.push_back({blk.F.v.data(), blk.F.v.size()});
    s.push_back({blk.b.data(), blk.b.size()});
    s.push_back({blk.gamma.data(), blk.gamma.size()});
    s.push_back({blk.beta.data(), blk.beta.size()});
  }
  s.push_back({p.Wh.v.data(), p.Wh.v.size()});
  s.push_back({p.bh.data(), p.bh.size()});
  s.push_back({p.Wo.v.data(), p.Wo.v.size()});
  s.push_back({p.bo.data(), p.bo.size()});
  return s;
}

inline std::size_t n_params(const ModelParams& p) {
  std::size_t total = 0;
  for (const ParamSpan& s : param_spans(const_cast<ModelParams&>(p))) {
    total += s.size;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Encoding a QA pair for the network
// ---------------------------------------------------------------------------

struct EncodedPair {
  std::string qid;
  std::string aid;
  EncodedSentence q;
  EncodedSentence a;
  std::vector<double> feats;  // length kNumFeatures
  int label = 0;
};

inline std::vector<EncodedPair> encode_pairs(const std::vector<QAPair>& pairs,
                                             const RunConfig& cfg,
                                             const IdfTable& idf) {
  const CharAlphabet& alphabet = build_alphabet();
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  for (const QAPair& p : pairs) {
    EncodedPair e;
    e.qid = p.qid;
    e.aid = p.aid;
    e.q = encode(p.question, cfg.max_len_q, alphabet);
    e.a = encode(p.answer, cfg.max_len_a, alphabet);
    const std::vector<std::string> qt = tokenize(p.question);
    const std::vector<std::string> at = tokenize(p.answer);
    e.feats = {word_overlap(qt, at), idf_overlap(qt, at, idf)};
    e.label = p.label;
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

// Per-branch BN statistics pool over that branch's batch items and time
// positions; per-pair scoring is the single-item case of the same path.
struct BlockCache {
  std::vector<Tensor> pre_act;   // activation input per item
  std::vector<Tensor> post_act;  // activation output per item
  ops::BnCache bn;               // set only when BN is enabled in train mode
};

struct BranchCache {
  std::vector<EncodedSentence> sents;
  std::vector<Tensor> S;  // embedding output per item
  std::vector<BlockCache> blocks;
  std::vector<ops::PoolResult> pool;
};

struct ItemCache {
  std::vector<double> feats;
  std::vector<double> join;
  std::vector<double> hidden_pre;
  std::vector<double> hidden_post;
  std::vector<double> dropout_mask;
  std::vector<double> dropped;
  std::vector<double> probs;
};

struct ForwardCache {
  bool train = false;
  int batch = 0;
  BranchCache q;
  BranchCache a;
  std::vector<ItemCache> items;
};

namespace detail {

inline Tensor stack_rank3(const std::vector<Tensor>& xs) {
  const int B = static_cast<int>(xs.size());
  const int n = xs[0].shape[0];
  const int L = xs[0].shape[1];
  Tensor out = Tensor::zeros({B, n, L});
  for (int bi = 0; bi < B; ++bi) {
    std::copy(xs[static_cast<std::size_t>(bi)].v.begin(),
              xs[static_cast<std::size_t>(bi)].v.end(),
              out.v.begin() + static_cast<std::ptrdiff_t>(bi) * n * L);
  }
  return out;
}

inline std::vector<Tensor> unstack_rank3(const Tensor& x) {
  const int B = x.shape[0];
  const int n = x.shape[1];
  const int L = x.shape[2];
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(B));
  for (int bi = 0; bi < B; ++bi) {
    Tensor t = Tensor::zeros({n, L});
    std::copy(x.v.begin() + static_cast<std::ptrdiff_t>(bi) * n * L,
              x.v.begin() + static_cast<std::ptrdiff_t>(bi + 1) * n * L,
              t.v.begin());
    out.push_back(std::move(t));
  }
  return out;
}

inline void branch_forward(const ModelParams& params, const RunConfig& cfg,
                           bool train, BranchCache& br) {
  const std::size_t B = br.sents.size();
  br.S.clear();
  br.blocks.assign(params.blocks.size(), BlockCache{});
  br.pool.clear();

  for (const EncodedSentence& s : br.sents) {
    br.S.push_back(ops::embedding_forward(params.W, s));
  }

  const std::vector<Tensor>* layer_in = &br.S;
  for (std::size_t k = 0; k < params.blocks.size(); ++k) {
    const ops::ConvBlockParams& blk = params.blocks[k];
    BlockCache& bc = br.blocks[k];
    std::vector<Tensor> conv_out;
    conv_out.reserve(B);
    for (const Tensor& x : *layer_in) {
      conv_out.push_back(ops::conv1d_forward(blk, x, ops::ConvMode::narrow));
    }
    if (cfg.use_bn) {
      Tensor stacked = stack_rank3(conv_out);
      Tensor normed;
      if (train) {
        bc.bn = ops::bn_forward_train(stacked, blk.gamma, blk.beta, cfg.bn_eps,
                                      normed);
      } else {
        normed = ops::bn_forward_infer(stacked, blk.gamma, blk.beta,
                                       blk.running_mean, blk.running_var,
                                       cfg.bn_eps);
      }
      bc.pre_act = unstack_rank3(normed);
    } else {
      bc.pre_act = std::move(conv_out);
    }
    bc.post_act = bc.pre_act;
    for (Tensor& t : bc.post_act) {
      ops::activation_inplace(cfg.activation, t.v.data(), t.v.size());
    }
    layer_in = &bc.post_act;
  }

  for (const Tensor& t : *layer_in) {
    br.pool.push_back(ops::maxpool_time(t));
  }
}

// dpool: per item, gradient w.r.t. the pooled vector. Accumulates into
// grads; returns nothing (embedding gradient lands in grads.W).
inline void branch_backward(const ModelParams& params, const RunConfig& cfg,
                            const BranchCache& br,
                            const std::vector<std::vector<double>>& dpool,
                            ModelParams& grads) {
  const std::size_t B = br.sents.size();
  const std::size_t n_blocks = params.blocks.size();

  // gradient w.r.t. the last block's post-activation output
  std::vector<Tensor> dpost(B);
  for (std::size_t i = 0; i < B; ++i) {
    const Tensor& last = br.blocks[n_blocks - 1].post_act[i];
    dpost[i] = Tensor::zeros(last.shape);
    ops::maxpool_backward(br.pool[i], dpool[i], dpost[i]);
  }

  for (std::size_t k = n_blocks; k-- > 0;) {
    const ops::ConvBlockParams& blk = params.blocks[k];
    const BlockCache& bc = br.blocks[k];

    // through the activation: dpost becomes the pre-activation gradient
    for (std::size_t i = 0; i < B; ++i) {
      if (cfg.activation == ops::Activation::relu) {
        ops::relu_backward_inplace(bc.pre_act[i].v.data(), dpost[i].v.data(),
                                   dpost[i].v.size());
      } else {
        ops::tanh_backward_inplace(bc.post_act[i].v.data(), dpost[i].v.data(),
                                   dpost[i].v.size());
      }
    }

    // through BN (if present): gradient w.r.t. the conv output
    std::vector<Tensor> dconv;
    if (cfg.use_bn) {
      Tensor dY = stack_rank3(dpost);
      ops::BnGrads bg = ops::bn_backward(dY, blk.gamma, bc.bn);
      for (std::size_t i = 0; i < blk.gamma.size(); ++i) {
        grads.blocks[k].gamma[i] += bg.dgamma[i];
        grads.blocks[k].beta[i] += bg.dbeta[i];
      }
      dconv = unstack_rank3(bg.dX);
    } else {
      dconv = std::move(dpost);
    }

    // through the convolution
    const std::vector<Tensor>& layer_in =
        k == 0 ? br.S : br.blocks[k - 1].post_act;
    std::vector<Tensor> dprev(B);
    for (std::size_t i = 0; i < B; ++i) {
      ops::ConvGrads cg = ops::conv1d_backward(blk, layer_in[i],
                                               ops::ConvMode::narrow, dconv[i]);
      for (std::size_t j = 0; j < cg.dF.v.size(); ++j) {
        grads.blocks[k].F.v[j] += cg.dF.v[j];
      }
      for (std::size_t j = 0; j < cg.db.size(); ++j) {
        grads.blocks[k].b[j] += cg.db[j];
      }
      dprev[i] = std::move(cg.dS);
    }
    dpost = std::move(dprev);
  }

  for (std::size_t i = 0; i < B; ++i) {
    ops::embedding_backward(br.sents[i], dpost[i], grads.W);
  }
}

}  // namespace detail

// Runs a whole batch through both branches. Train mode uses batch BN
// statistics (pooled per branch) and applies dropout; it never touches the
// stored running stats — see update_running_stats.
inline void forward_batch(const ModelParams& params, const RunConfig& cfg,
                          const std::vector<const EncodedPair*>& batch,
                          bool train, Rng& rng, ForwardCache& cache) {
  if (batch.empty()) throw contract_error("forward_batch: empty batch");
  cache.train = train;
  cache.batch = static_cast<int>(batch.size());
  cache.q.sents.clear();
  cache.a.sents.clear();
  for (const EncodedPair* p : batch) {
    if (static_cast<int>(p->feats.size()) != kNumFeatures) {
      throw contract_error("expected " + std::to_string(kNumFeatures) +
                           " join features");
    }
    cache.q.sents.push_back(p->q);
    cache.a.sents.push_back(p->a);
  }

  detail::branch_forward(params, cfg, train, cache.q);
  detail::branch_forward(params, cfg, train, cache.a);

  cache.items.assign(batch.size(), ItemCache{});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ItemCache& it = cache.items[i];
    it.feats = batch[i]->feats;
    it.join.clear();
    it.join.reserve(static_cast<std::size_t>(join_dim(cfg)));
    it.join.insert(it.join.end(), cache.q.pool[i].values.begin(),
                   cache.q.pool[i].values.end());
    it.join.insert(it.join.end(), cache.a.pool[i].values.begin(),
                   cache.a.pool[i].values.end());
    it.join.insert(it.join.end(), it.feats.begin(), it.feats.end());
    if (static_cast<int>(it.join.size()) != join_dim(cfg)) {
      throw contract_error("join width mismatch");
    }

    it.hidden_pre = ops::dense_forward(params.Wh, params.bh, it.join);
    it.hidden_post = it.hidden_pre;
    ops::activation_inplace(cfg.activation, it.hidden_post.data(),
                            it.hidden_post.size());
    ops::DropoutResult dr =
        ops::dropout_forward(it.hidden_post, cfg.dropout_rate, train, rng);
    it.dropped = std::move(dr.y);
    it.dropout_mask = std::move(dr.mask);
    it.probs = ops::softmax(ops::dense_forward(params.Wo, params.bo, it.dropped));
    ensure_finite(it.probs, "class probabilities");
  }
}

// Accumulates gradients for the whole batch into `grads` (caller supplies a
// zero_like or keeps accumulating across calls). dprobs[i] is the loss
// gradient w.r.t. item i's probability vector.
inline void backward_batch(const ModelParams& params, const RunConfig& cfg,
                           const ForwardCache& cache,
                           const std::vector<std::vector<double>>& dprobs,
                           ModelParams& grads) {
  if (!cache.train) {
    throw contract_error("backward_batch needs a train-mode forward cache");
  }
  if (cache.items.size() != dprobs.size()) {
    throw contract_error("backward_batch: gradient count mismatch");
  }
  if (grads.blocks.size() != params.blocks.size() ||
      !grads.W.same_shape(params.W)) {
    throw contract_error("backward_batch: gradient set incongruent with params");
  }
  if (cache.q.blocks.size() != params.blocks.size() ||
      cache.q.S.empty() || cache.q.S[0].shape[0] != params.W.shape[0]) {
    throw contract_error("backward_batch: cache incongruent with params");
  }

  const std::size_t B = cache.items.size();
  const int n_last = cfg.conv_blocks.back().n_filters;
  std::vector<std::vector<double>> dpool_q(B), dpool_a(B);

  for (std::size_t i = 0; i < B; ++i) {
    const ItemCache& it = cache.items[i];
    const std::vector<double> dlogits =
        ops::softmax_backward(it.probs, dprobs[i]);

    ops::DenseGrads og = ops::dense_backward(params.Wo, it.dropped, dlogits);
    for (std::size_t j = 0; j < og.dW.v.size(); ++j) grads.Wo.v[j] += og.dW.v[j];
    for (std::size_t j = 0; j < og.db.size(); ++j) grads.bo[j] += og.db[j];

    std::vector<double> dhidden =
        ops::dropout_backward(it.dropout_mask, og.dx);
    if (cfg.activation == ops::Activation::relu) {
      ops::relu_backward_inplace(it.hidden_pre.data(), dhidden.data(),
                                 dhidden.size());
    } else {
      ops::tanh_backward_inplace(it.hidden_post.data(), dhidden.data(),
                                 dhidden.size());
    }

    ops::DenseGrads hg = ops::dense_backward(params.Wh, it.join, dhidden);
    for (std::size_t j = 0; j < hg.dW.v.size(); ++j) grads.Wh.v[j] += hg.dW.v[j];
    for (std::size_t j = 0; j < hg.db.size(); ++j) grads.bh[j] += hg.db[j];

    dpool_q[i].assign(hg.dx.begin(), hg.dx.begin() + n_last);
    dpool_a[i].assign(hg.dx.begin() + n_last, hg.dx.begin() + 2 * n_last);
    // the two overlap features are inputs, not parameters: their gradient
    // slice is dropped
  }

  detail::branch_backward(params, cfg, cache.q, dpool_q, grads);
  detail::branch_backward(params, cfg, cache.a, dpool_a, grads);
}

// Folds the batch statistics captured by a train-mode forward into the
// stored running stats, question branch first. This is the only place the
// running stats change.
inline void update_running_stats(ModelParams& params, const RunConfig& cfg,
                                 const ForwardCache& cache) {
  if (!cfg.use_bn || !cache.train) return;
  for (std::size_t k = 0; k < params.blocks.size(); ++k) {
    ops::bn_update_running_stats(cache.q.blocks[k].bn, cfg.bn_momentum,
                                 params.blocks[k].running_mean,
                                 params.blocks[k].running_var);
    ops::bn_update_running_stats(cache.a.blocks[k].bn, cfg.bn_momentum,
                                 params.blocks[k].running_mean,
                                 params.blocks[k].running_var);
  }
}

inline void forward_pair(const ModelParams& params, const RunConfig& cfg,
                         const EncodedPair& pair, bool train, Rng& rng,
                         ForwardCache& cache) {
  forward_batch(params, cfg, {&pair}, train, rng, cache);
}

// Inference-mode probability that the answer is correct.
inline double score(const ModelParams& params, const RunConfig& cfg,
                    const EncodedPair& pair) {
  Rng rng(0);  // inference draws nothing; any seed works
  ForwardCache cache;
  forward_pair(params, cfg, pair, false, rng, cache);
  return cache.items[0].probs[1];
}

// Scores a whole split in inference mode, batched for speed; output order
// matches input order.
inline std::vector<ScoredPair> score_pairs(const ModelParams& params,
                                           const RunConfig& cfg,
                                           const std::vector<EncodedPair>& pairs,
                                           int batch_size) {
  if (batch_size < 1) throw contract_error("batch_size must be >= 1");
  Rng rng(0);
  ForwardCache cache;
  std::vector<ScoredPair> scored;
  scored.reserve(pairs.size());
  for (std::size_t start = 0; start < pairs.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop =
        std::min(pairs.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const EncodedPair*> batch;
    batch.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) batch.push_back(&pairs[i]);
    forward_batch(params, cfg, batch, false, rng, cache);
    for (std::size_t i = start; i < stop; ++i) {
      scored.push_back({pairs[i].qid, pairs[i].aid,
                        cache.items[i - start].probs[1], pairs[i].label});
    }
  }
  return scored;
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline ordered_json tensor_to_json(const Tensor& t) {
  ordered_json j;
  j["shape"] = t.shape;
  j["values"] = t.v;
  return j;
}

inline Tensor tensor_from_json(const ordered_json& j) {
  Tensor t;
  t.shape = j.at("shape").get<std::vector<int>>();
  t.v = j.at("values").get<std::vector<double>>();
  std::size_t expect = 1;
  for (int d : t.shape) expect *= static_cast<std::size_t>(d);
  if (t.shape.empty() || t.v.size() != expect) {
    throw load_error("tensor shape/value mismatch in checkpoint");
  }
  return t;
}

inline ordered_json config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["embed_dim"] = cfg.embed_dim;
  ordered_json blocks = ordered_json::array();
  for (const ConvSpec& b : cfg.conv_blocks) {
    blocks.push_back({b.width, b.n_filters});
  }
  j["conv_blocks"] = blocks;
  j["hidden_dim"] = cfg.hidden_dim;
  j["dropout_rate"] = cfg.dropout_rate;
  j["use_bn"] = cfg.use_bn;
  j["activation"] =
      cfg.activation == ops::Activation::relu ? "relu" : "tanh";
  j["max_len_q"] = cfg.max_len_q;
  j["max_len_a"] = cfg.max_len_a;
  j["lambda"] = cfg.lambda;
  j["adadelta_rho"] = cfg.adadelta_rho;
  j["adadelta_eps"] = cfg.adadelta_eps;
  j["batch_size"] = cfg.batch_size;
  j["patience"] = cfg.patience;
  j["max_epochs"] = cfg.max_epochs;
  j["seed"] = cfg.seed;
  j["bn_eps"] = cfg.bn_eps;
  j["bn_momentum"] = cfg.bn_momentum;
  return j;
}

inline RunConfig config_from_json(const ordered_json& j) {
  RunConfig cfg;
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.conv_blocks.clear();
  for (const auto& b : j.at("conv_blocks")) {
    if (!b.is_array() || b.size() != 2) {
      throw load_error("malformed conv_blocks entry in checkpoint");
    }
    cfg.conv_blocks.push_back({b[0].get<int>(), b[1].get<int>()});
  }
  cfg.hidden_dim = j.at("hidden_dim").get<int>();
  cfg.dropout_rate = j.at("dropout_rate").get<double>();
  cfg.use_bn = j.at("use_bn").get<bool>();
  const std::string act = j.at("activation").get<std::string>();
  if (act == "relu") {
    cfg.activation = ops::Activation::relu;
  } else if (act == "tanh") {
    cfg.activation = ops::Activation::tanh;
  } else {
    throw load_error("unknown activation \"" + act + "\" in checkpoint");
  }
  cfg.max_len_q = j.at("max_len_q").get<int>();
  cfg.max_len_a = j.at("max_len_a").get<int>();
  cfg.lambda = j.at("lambda").get<double>();
  cfg.adadelta_rho = j.at("adadelta_rho").get<double>();
  cfg.adadelta_eps = j.at("adadelta_eps").get<double>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.patience = j.at("patience").get<int>();
  cfg.max_epochs = j.at("max_epochs").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.bn_eps = j.at("bn_eps").get<double>();
  cfg.bn_momentum = j.at("bn_momentum").get<double>();
  return cfg;
}

}  // namespace detail

struct Checkpoint {
  RunConfig config;
  ModelParams params;
  IdfTable idf;
};

// Self-contained JSON artifact: config, alphabet fingerprint, every
// parameter array, BN running stats, and the IDF table the features were
// built with. Write-then-read restores bit-identical values.
inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  using detail::ordered_json;
  ordered_json j;
  j["format"] = "csrnet-checkpoint";
  j["version"] = 1;
  j["alphabet_hash"] = build_alphabet().hash();
  j["config"] = detail::config_to_json(ckpt.config);

  ordered_json params;
  params["W"] = detail::tensor_to_json(ckpt.params.W);
  ordered_json blocks = ordered_json::array();
  for (const ops::ConvBlockParams& blk : ckpt.params.blocks) {
    ordered_json b;
    b["F"] = detail::tensor_to_json(blk.F);
    b["b"] = blk.b;
    b["gamma"] = blk.gamma;
    b["beta"] = blk.beta;
    b["running_mean"] = blk.running_mean;
    b["running_var"] = blk.running_var;
    blocks.push_back(std::move(b));
  }
  params["blocks"] = std::move(blocks);
  params["Wh"] = detail::tensor_to_json(ckpt.params.Wh);
  params["bh"] = ckpt.params.bh;
  params["Wo"] = detail::tensor_to_json(ckpt.params.Wo);
  params["bo"] = ckpt.params.bo;
  j["params"] = std::move(params);

  ordered_json idf;
  idf["n_docs"] = ckpt.idf.n_docs;
  idf["default_idf"] = ckpt.idf.default_idf;
  ordered_json words = ordered_json::object();
  std::vector<std::string> sorted;
  sorted.reserve(ckpt.idf.idf.size());
  for (const auto& [w, v] : ckpt.idf.idf) sorted.push_back(w);
  std::sort(sorted.begin(), sorted.end());
  for (const std::string& w : sorted) words[w] = ckpt.idf.idf.at(w);
  idf["values"] = std::move(words);
  j["idf"] = std::move(idf);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw io_error("write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  detail::ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw load_error("checkpoint is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (j.at("format").get<std::string>() != "csrnet-checkpoint") {
      throw load_error("not a checkpoint file");
    }
    if (j.at("version").get<int>() != 1) {
      throw load_error("unsupported checkpoint version");
    }
    if (j.at("alphabet_hash").get<std::uint64_t>() != build_alphabet().hash()) {
      throw load_error(
          "checkpoint was written against a different character alphabet");
    }

    Checkpoint ckpt;
    ckpt.config = detail::config_from_json(j.at("config"));
    validate_config(ckpt.config);

    const auto& params = j.at("params");
    ckpt.params.W = detail::tensor_from_json(params.at("W"));
    for (const auto& b : params.at("blocks")) {
      ops::ConvBlockParams blk;
      blk.F = detail::tensor_from_json(b.at("F"));
      blk.b = b.at("b").get<std::vector<double>>();
      blk.gamma = b.at("gamma").get<std::vector<double>>();
      blk.beta = b.at("beta").get<std::vector<double>>();
      blk.running_mean = b.at("running_mean").get<std::vector<double>>();
      blk.running_var = b.at("running_var").get<std::vector<double>>();
      ckpt.params.blocks.push_back(std::move(blk));
    }
    ckpt.params.Wh = detail::tensor_from_json(params.at("Wh"));
    ckpt.params.bh = params.at("bh").get<std::vector<double>>();
    ckpt.params.Wo = detail::tensor_from_json(params.at("Wo"));
    ckpt.params.bo = params.at("bo").get<std::vector<double>>();

    const auto& idf = j.at("idf");
    ckpt.idf.n_docs = idf.at("n_docs").get<long>();
    ckpt.idf.default_idf = idf.at("default_idf").get<double>();
    for (const auto& [w, v] : idf.at("values").items()) {
      ckpt.idf.idf[w] = v.get<double>();
    }

    // structural congruence with the config
    Rng probe(0);
    ModelParams expect = init_model(ckpt.config, probe);
    if (!expect.W.same_shape(ckpt.params.W) ||
        expect.blocks.size() != ckpt.params.blocks.size() ||
        !expect.Wh.same_shape(ckpt.params.Wh) ||
        !expect.Wo.same_shape(ckpt.params.Wo) ||
        expect.bh.size() != ckpt.params.bh.size() ||
        expect.bo.size() != ckpt.params.bo.size()) {
      throw load_error("checkpoint parameters do not match its config");
    }
    for (std::size_t k = 0; k < expect.blocks.size(); ++k) {
      const ops::ConvBlockParams& e = expect.blocks[k];
      const ops::ConvBlockParams& g = ckpt.params.blocks[k];
      if (!e.F.same_shape(g.F) || e.b.size() != g.b.size() ||
          e.gamma.size() != g.gamma.size() || e.beta.size() != g.beta.size() ||
          e.running_mean.size() != g.running_mean.size() ||
          e.running_var.size() != g.running_var.size()) {
        throw load_error("checkpoint parameters do not match its config");
      }
    }
    return ckpt;
  } catch (const detail::ordered_json::exception& e) {
    throw load_error("malformed checkpoint: " + std::string(e.what()));
  }
}

}  // namespace csrnet
