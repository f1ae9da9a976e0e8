#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "csrnet/model.hpp"
#include "csrnet/optim.hpp"
#include "support/tmpfile.hpp"

using namespace csrnet;
using testsupport::TmpDir;

namespace {

RunConfig tiny_cfg() {
  RunConfig cfg;
  cfg.embed_dim = 6;
  cfg.conv_blocks = {{3, 5}, {2, 4}};
  cfg.hidden_dim = 7;
  cfg.max_len_q = 12;
  cfg.max_len_a = 16;
  cfg.batch_size = 4;
  return cfg;
}

EncodedPair make_pair(const RunConfig& cfg, Rng& rng, int label = 1) {
  EncodedPair p;
  p.qid = "q";
  p.aid = "a";
  p.q.indices.resize(static_cast<std::size_t>(cfg.max_len_q));
  p.a.indices.resize(static_cast<std::size_t>(cfg.max_len_a));
  for (int& i : p.q.indices) i = 1 + static_cast<int>(rng.below(26));
  for (int& i : p.a.indices) i = 1 + static_cast<int>(rng.below(26));
  p.q.true_len = cfg.max_len_q;
  p.a.true_len = cfg.max_len_a;
  p.feats = {rng.uniform(), rng.uniform()};
  p.label = label;
  return p;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  ModelParams& ma = const_cast<ModelParams&>(a);
  ModelParams& mb = const_cast<ModelParams&>(b);
  const auto sa = param_spans(ma);
  const auto sb = param_spans(mb);
  if (sa.size() != sb.size()) return false;
  for (std::size_t s = 0; s < sa.size(); ++s) {
    if (sa[s].size != sb[s].size) return false;
    for (std::size_t i = 0; i < sa[s].size; ++i) {
      if (sa[s].data[i] != sb[s].data[i]) return false;
    }
  }
  // running stats are not spanned; compare them too
  for (std::size_t k = 0; k < a.blocks.size(); ++k) {
    if (a.blocks[k].running_mean != b.blocks[k].running_mean) return false;
    if (a.blocks[k].running_var != b.blocks[k].running_var) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("default configuration builds the documented shapes") {
  RunConfig cfg;
  CHECK(cfg.embed_dim == 50);
  CHECK(cfg.hidden_dim == 100);
  CHECK(cfg.dropout_rate == 0.0);
  CHECK(cfg.use_bn);
  CHECK(cfg.max_len_q == 192);
  CHECK(cfg.max_len_a == 386);
  CHECK(cfg.lambda == 5e-4);
  CHECK(cfg.patience == 5);
  Rng rng(1);
  ModelParams p = init_model(cfg, rng);
  CHECK(p.W.shape == std::vector<int>{50, 71});
  REQUIRE(p.blocks.size() == 2);
  CHECK(p.blocks[0].F.shape == std::vector<int>{128, 50, 3});
  CHECK(p.blocks[1].F.shape == std::vector<int>{32, 128, 5});
  CHECK(join_dim(cfg) == 2 * 32 + 2);
  CHECK(p.Wh.shape == std::vector<int>{100, 66});
  CHECK(p.Wo.shape == std::vector<int>{2, 100});
  CHECK(p.blocks[0].gamma == std::vector<double>(128, 1.0));
  CHECK(p.blocks[0].beta == std::vector<double>(128, 0.0));
  CHECK(p.blocks[0].running_var == std::vector<double>(128, 1.0));
  CHECK(p.bh == std::vector<double>(100, 0.0));
}

TEST_CASE("initialization is deterministic in the seed") {
  RunConfig cfg = tiny_cfg();
  Rng r1(9), r2(9), r3(10);
  ModelParams a = init_model(cfg, r1);
  ModelParams b = init_model(cfg, r2);
  ModelParams c = init_model(cfg, r3);
  CHECK(params_equal(a, b));
  CHECK_FALSE(params_equal(a, c));
  for (double x : a.W.v) {
    CHECK(x >= -0.05);
    CHECK(x <= 0.05);
  }
}

TEST_CASE("config validation rejects inconsistent settings") {
  RunConfig cfg = tiny_cfg();
  cfg.conv_blocks.clear();
  CHECK_THROWS_AS(validate_config(cfg), config_error);
  cfg = tiny_cfg();
  cfg.max_len_q = 2;  // stack needs at least 4
  CHECK_THROWS_AS(validate_config(cfg), config_error);
  cfg = tiny_cfg();
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(validate_config(cfg), config_error);
  cfg = tiny_cfg();
  cfg.adadelta_rho = 0.0;
  CHECK_THROWS_AS(validate_config(cfg), config_error);
  CHECK(min_sentence_len(tiny_cfg()) == 4);
}

TEST_CASE("forward produces a probability distribution") {
  RunConfig cfg = tiny_cfg();
  Rng rng(3);
  ModelParams p = init_model(cfg, rng);
  EncodedPair pair = make_pair(cfg, rng);
  ForwardCache cache;
  Rng frng(5);
  forward_pair(p, cfg, pair, true, frng, cache);
  const std::vector<double>& probs = cache.items[0].probs;
  REQUIRE(probs.size() == 2);
  CHECK(probs[0] > 0.0);
  CHECK(probs[1] > 0.0);
  CHECK(std::fabs(probs[0] + probs[1] - 1.0) <= 1e-12);
}

TEST_CASE("scoring is deterministic across repeated calls") {
  RunConfig cfg = tiny_cfg();
  Rng rng(3);
  ModelParams p = init_model(cfg, rng);
  EncodedPair pair = make_pair(cfg, rng);
  const double s1 = score(p, cfg, pair);
  const double s2 = score(p, cfg, pair);
  CHECK(s1 == s2);
  CHECK(s1 > 0.0);
  CHECK(s1 < 1.0);
}

TEST_CASE("all-zero parameters score one half") {
  RunConfig cfg = tiny_cfg();
  Rng rng(3);
  ModelParams zero = zero_like(init_model(cfg, rng));
  for (ops::ConvBlockParams& blk : zero.blocks) {
    blk.running_var.assign(blk.running_var.size(), 1.0);
  }
  EncodedPair pair = make_pair(cfg, rng);
  CHECK(score(zero, cfg, pair) == 0.5);
}

TEST_CASE("swapping the branches swaps only the pooled halves") {
  RunConfig cfg = tiny_cfg();
  cfg.max_len_a = cfg.max_len_q;  // same length so the swap is legal
  Rng rng(7);
  ModelParams p = init_model(cfg, rng);
  EncodedPair pair = make_pair(cfg, rng);

  EncodedPair swapped = pair;
  std::swap(swapped.q, swapped.a);

  ForwardCache c1, c2;
  Rng r1(0), r2(0);
  forward_pair(p, cfg, pair, false, r1, c1);
  forward_pair(p, cfg, swapped, false, r2, c2);
  CHECK(c1.items[0].join.size() == c2.items[0].join.size());
  CHECK(c1.q.pool[0].values == c2.a.pool[0].values);
  CHECK(c1.a.pool[0].values == c2.q.pool[0].values);
}

TEST_CASE("narrow stack lengths follow the shrinkage arithmetic") {
  RunConfig cfg;  // default: widths 3 then 5
  cfg.max_len_q = 125;
  Rng rng(11);
  ModelParams p = init_model(cfg, rng);
  EncodedPair pair = make_pair(cfg, rng);
  ForwardCache cache;
  Rng frng(0);
  forward_pair(p, cfg, pair, false, frng, cache);
  CHECK(cache.q.blocks[0].post_act[0].shape == std::vector<int>{128, 123});
  CHECK(cache.q.blocks[1].post_act[0].shape == std::vector<int>{32, 119});
  CHECK(cache.q.pool[0].values.size() == 32);
}

TEST_CASE("a sentence shorter than the stack shrinkage is rejected") {
  RunConfig cfg = tiny_cfg();
  Rng rng(3);
  ModelParams p = init_model(cfg, rng);
  EncodedPair pair = make_pair(cfg, rng);
  pair.q.indices = {1, 2};  // needs at least 4
  pair.q.true_len = 2;
  ForwardCache cache;
  Rng frng(0);
  CHECK_THROWS_AS(forward_pair(p, cfg, pair, false, frng, cache), shape_error);
}

TEST_CASE("wrong feature count is a contract violation") {
  RunConfig cfg = tiny_cfg();
  Rng rng(3);
  ModelParams p = init_model(cfg, rng);
  EncodedPair pair = make_pair(cfg, rng);
  pair.feats = {0.5};
  ForwardCache cache;
  Rng frng(0);
  CHECK_THROWS_AS(forward_pair(p, cfg, pair, false, frng, cache),
                  contract_error);
}

TEST_CASE("forward and backward leave the parameters bit-unchanged") {
  RunConfig cfg = tiny_cfg();
  Rng rng(13);
  ModelParams p = init_model(cfg, rng);
  ModelParams snapshot = p;
  EncodedPair pair = make_pair(cfg, rng);
  ForwardCache cache;
  Rng frng(2);
  forward_pair(p, cfg, pair, true, frng, cache);
  ModelParams grads = zero_like(p);
  backward_batch(p, cfg, cache, {{0.3, -0.7}}, grads);
  CHECK(params_equal(p, snapshot));
}

TEST_CASE("backward demands a train-mode cache and congruent gradients") {
  RunConfig cfg = tiny_cfg();
  Rng rng(13);
  ModelParams p = init_model(cfg, rng);
  EncodedPair pair = make_pair(cfg, rng);
  ForwardCache cache;
  Rng frng(2);
  forward_pair(p, cfg, pair, false, frng, cache);
  ModelParams grads = zero_like(p);
  CHECK_THROWS_AS(backward_batch(p, cfg, cache, {{0.3, -0.7}}, grads),
                  contract_error);

  forward_pair(p, cfg, pair, true, frng, cache);
  CHECK_THROWS_AS(backward_batch(p, cfg, cache, {{0.3, -0.7}, {0.1, 0.2}},
                                 grads),
                  contract_error);
}

TEST_CASE("zero upstream gradient produces an all-zero gradient set") {
  RunConfig cfg = tiny_cfg();
  Rng rng(13);
  ModelParams p = init_model(cfg, rng);
  EncodedPair pair = make_pair(cfg, rng);
  ForwardCache cache;
  Rng frng(2);
  forward_pair(p, cfg, pair, true, frng, cache);
  ModelParams grads = zero_like(p);
  backward_batch(p, cfg, cache, {{0.0, 0.0}}, grads);
  for (const ParamSpan& s : param_spans(grads)) {
    for (std::size_t i = 0; i < s.size; ++i) CHECK(s.data[i] == 0.0);
  }
}

TEST_CASE("shared-parameter gradients are the sum of both branch flows") {
  RunConfig cfg = tiny_cfg();
  Rng rng(21);
  ModelParams p = init_model(cfg, rng);
  EncodedPair pair = make_pair(cfg, rng);
  ForwardCache cache;
  Rng frng(2);
  forward_pair(p, cfg, pair, true, frng, cache);
  const std::vector<std::vector<double>> dprobs = {{0.4, -1.1}};

  ModelParams full = zero_like(p);
  backward_batch(p, cfg, cache, dprobs, full);

  // replay the head backward to recover the per-branch pooled gradients
  const ItemCache& it = cache.items[0];
  std::vector<double> dlogits = ops::softmax_backward(it.probs, dprobs[0]);
  ops::DenseGrads og = ops::dense_backward(p.Wo, it.dropped, dlogits);
  std::vector<double> dhidden = ops::dropout_backward(it.dropout_mask, og.dx);
  ops::relu_backward_inplace(it.hidden_pre.data(), dhidden.data(),
                             dhidden.size());
  ops::DenseGrads hg = ops::dense_backward(p.Wh, it.join, dhidden);
  const int n_last = cfg.conv_blocks.back().n_filters;
  std::vector<std::vector<double>> dpool_q = {
      {hg.dx.begin(), hg.dx.begin() + n_last}};
  std::vector<std::vector<double>> dpool_a = {
      {hg.dx.begin() + n_last, hg.dx.begin() + 2 * n_last}};

  // detached branches: each accumulates into its own gradient store
  ModelParams only_q = zero_like(p);
  ModelParams only_a = zero_like(p);
  detail::branch_backward(p, cfg, cache.q, dpool_q, only_q);
  detail::branch_backward(p, cfg, cache.a, dpool_a, only_a);

  for (std::size_t i = 0; i < full.W.v.size(); ++i) {
    CHECK(full.W.v[i] ==
          Catch::Approx(only_q.W.v[i] + only_a.W.v[i]).margin(1e-12));
  }
  for (std::size_t k = 0; k < full.blocks.size(); ++k) {
    for (std::size_t i = 0; i < full.blocks[k].F.v.size(); ++i) {
      CHECK(full.blocks[k].F.v[i] ==
            Catch::Approx(only_q.blocks[k].F.v[i] + only_a.blocks[k].F.v[i])
                .margin(1e-12));
    }
  }
}

TEST_CASE("running stats move only through the explicit update") {
  RunConfig cfg = tiny_cfg();
  Rng rng(17);
  ModelParams p = init_model(cfg, rng);
  EncodedPair pair = make_pair(cfg, rng);
  ForwardCache cache;
  Rng frng(2);
  forward_pair(p, cfg, pair, true, frng, cache);
  CHECK(p.blocks[0].running_mean == std::vector<double>(5, 0.0));
  CHECK(p.blocks[0].running_var == std::vector<double>(5, 1.0));
  update_running_stats(p, cfg, cache);
  bool moved = false;
  for (double m : p.blocks[0].running_mean) moved = moved || m != 0.0;
  CHECK(moved);
}

TEST_CASE("encode_pairs builds lengths, features, and labels") {
  RunConfig cfg = tiny_cfg();
  std::vector<QAPair> raw = {
      {"q1", "a1", "Who won the game?", "The game was won early.", 1}};
  IdfTable idf = build_idf(raw);
  std::vector<EncodedPair> enc = encode_pairs(raw, cfg, idf);
  REQUIRE(enc.size() == 1);
  CHECK(enc[0].q.indices.size() == static_cast<std::size_t>(cfg.max_len_q));
  CHECK(enc[0].a.indices.size() == static_cast<std::size_t>(cfg.max_len_a));
  CHECK(enc[0].label == 1);
  const auto qt = tokenize(raw[0].question);
  const auto at = tokenize(raw[0].answer);
  CHECK(enc[0].feats[0] == word_overlap(qt, at));
  CHECK(enc[0].feats[1] == idf_overlap(qt, at, idf));
}

TEST_CASE("checkpoints restore every array bit for bit") {
  RunConfig cfg = tiny_cfg();
  cfg.seed = 42;
  Rng rng(cfg.seed);
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.params = init_model(cfg, rng);
  // make the stored statistics non-trivial
  ckpt.params.blocks[0].running_mean[2] = 0.12345678901234567;
  ckpt.params.blocks[1].running_var[1] = 3.0000000000000004;
  ckpt.idf.n_docs = 7;
  ckpt.idf.default_idf = std::log(8.0) + 1.0;
  ckpt.idf.idf = {{"dog", 1.25}, {"cat", std::log(4.0) + 1.0}};

  TmpDir tmp;
  const std::string p1 = tmp.path("model.json");
  save_checkpoint(ckpt, p1);
  Checkpoint back = load_checkpoint(p1);

  CHECK(params_equal(ckpt.params, back.params));
  CHECK(back.config.embed_dim == cfg.embed_dim);
  CHECK(back.config.conv_blocks == cfg.conv_blocks);
  CHECK(back.config.seed == cfg.seed);
  CHECK(back.idf.n_docs == 7);
  CHECK(back.idf.idf.at("dog") == 1.25);
  CHECK(back.idf.idf.at("cat") == ckpt.idf.idf.at("cat"));
  CHECK(back.idf.default_idf == ckpt.idf.default_idf);

  // write-load-write is byte-stable
  const std::string p2 = tmp.path("model2.json");
  save_checkpoint(back, p2);
  CHECK(testsupport::read_file(p1) == testsupport::read_file(p2));
}

TEST_CASE("checkpoint loading rejects foreign or corrupt files") {
  TmpDir tmp;
  CHECK_THROWS_AS(load_checkpoint(tmp.path("absent.json")), io_error);
  CHECK_THROWS_AS(load_checkpoint(tmp.write("junk.json", "not json at all")),
                  load_error);
  CHECK_THROWS_AS(
      load_checkpoint(tmp.write("wrong.json", "{\"format\": \"other\"}")),
      load_error);

  // flip the alphabet fingerprint of an otherwise valid checkpoint
  RunConfig cfg = tiny_cfg();
  Rng rng(1);
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.params = init_model(cfg, rng);
  ckpt.idf.n_docs = 1;
  const std::string p = tmp.path("model.json");
  save_checkpoint(ckpt, p);
  std::string text = testsupport::read_file(p);
  const std::string key = "\"alphabet_hash\": ";
  const std::size_t at = text.find(key);
  REQUIRE(at != std::string::npos);
  text[at + key.size()] = text[at + key.size()] == '1' ? '2' : '1';
  CHECK_THROWS_AS(load_checkpoint(tmp.write("tampered.json", text)),
                  load_error);
}
