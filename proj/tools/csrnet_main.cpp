// csrnet command-line front end: data preparation, training, evaluation,
// multi-seed experiments, and a gradient self-check, all reproducible from
// the seed and the input files alone.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csrnet/alphabet.hpp"
#include "csrnet/dataio.hpp"
#include "csrnet/errors.hpp"
#include "csrnet/features.hpp"
#include "csrnet/model.hpp"
#include "csrnet/optim.hpp"
#include "csrnet/rankeval.hpp"

namespace fs = std::filesystem;
using namespace csrnet;

namespace {

// ---------------------------------------------------------------------------
// Configuration assembly: defaults, then dataset preset, then config file,
// then explicit flags — most specific source last.
// ---------------------------------------------------------------------------

// "3x128,5x32" -> [{width 3, filters 128}, {width 5, filters 32}]
std::vector<ConvSpec> parse_conv_blocks(const std::string& text) {
  std::vector<ConvSpec> blocks;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    const std::size_t x = item.find('x');
    if (x == std::string::npos || x == 0 || x + 1 >= item.size()) {
      throw config_error("conv_blocks entry '" + item +
                         "' is not of the form <width>x<filters>");
    }
    try {
      std::size_t used1 = 0;
      std::size_t used2 = 0;
      const int w = std::stoi(item.substr(0, x), &used1);
      const int n = std::stoi(item.substr(x + 1), &used2);
      if (used1 != x || used2 != item.size() - x - 1) {
        throw std::invalid_argument("trailing characters");
      }
      blocks.push_back({w, n});
    } catch (const std::exception&) {
      throw config_error("conv_blocks entry '" + item +
                         "' is not of the form <width>x<filters>");
    }
    if (comma == text.size()) break;
    pos = comma + 1;
  }
  if (blocks.empty()) throw config_error("conv_blocks must not be empty");
  return blocks;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw config_error("boolean value must be true/false/1/0, got '" + v + "'");
}

ops::Activation parse_activation(const std::string& v) {
  if (v == "relu") return ops::Activation::relu;
  if (v == "tanh") return ops::Activation::tanh;
  throw config_error("activation must be relu or tanh, got '" + v + "'");
}

void set_config_key(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  auto as_int = [&](const char* name) {
    try {
      std::size_t used = 0;
      const int x = std::stoi(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing");
      return x;
    } catch (const std::exception&) {
      throw config_error(std::string(name) + " expects an integer, got '" +
                         value + "'");
    }
  };
  auto as_double = [&](const char* name) {
    try {
      std::size_t used = 0;
      const double x = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing");
      return x;
    } catch (const std::exception&) {
      throw config_error(std::string(name) + " expects a number, got '" +
                         value + "'");
    }
  };
  auto as_u64 = [&](const char* name) {
    try {
      std::size_t used = 0;
      const unsigned long long x = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing");
      return static_cast<std::uint64_t>(x);
    } catch (const std::exception&) {
      throw config_error(std::string(name) +
                         " expects a non-negative integer, got '" + value +
                         "'");
    }
  };

  if (key == "embed_dim") cfg.embed_dim = as_int("embed_dim");
  else if (key == "conv_blocks") cfg.conv_blocks = parse_conv_blocks(value);
  else if (key == "hidden_dim") cfg.hidden_dim = as_int("hidden_dim");
  else if (key == "dropout_rate") cfg.dropout_rate = as_double("dropout_rate");
  else if (key == "use_bn") cfg.use_bn = parse_bool(value);
  else if (key == "activation") cfg.activation = parse_activation(value);
  else if (key == "max_len_q") cfg.max_len_q = as_int("max_len_q");
  else if (key == "max_len_a") cfg.max_len_a = as_int("max_len_a");
  else if (key == "lambda") cfg.lambda = as_double("lambda");
  else if (key == "adadelta_rho") cfg.adadelta_rho = as_double("adadelta_rho");
  else if (key == "adadelta_eps") cfg.adadelta_eps = as_double("adadelta_eps");
  else if (key == "batch_size") cfg.batch_size = as_int("batch_size");
  else if (key == "patience") cfg.patience = as_int("patience");
  else if (key == "max_epochs") cfg.max_epochs = as_int("max_epochs");
  else if (key == "seed") cfg.seed = as_u64("seed");
  else if (key == "bn_eps") cfg.bn_eps = as_double("bn_eps");
  else if (key == "bn_momentum") cfg.bn_momentum = as_double("bn_momentum");
  else throw config_error("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// key = value lines; '#' starts a comment; blank lines ignored.
void apply_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw parse_error("config line is not key = value: '" + line + "'",
                        line_no);
    }
    set_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

// Flag-supplied overrides; unset optionals leave the underlying value alone.
struct CfgOverrides {
  std::optional<int> embed_dim, hidden_dim, max_len_q, max_len_a, batch_size,
      patience, max_epochs;
  std::optional<double> dropout_rate, lambda, adadelta_rho, adadelta_eps,
      bn_eps, bn_momentum;
  std::optional<std::string> conv_blocks, use_bn, activation;
  std::optional<std::uint64_t> seed;
};

void add_config_flags(CLI::App* cmd, CfgOverrides& o) {
  cmd->add_option("--embed-dim", o.embed_dim, "Character embedding dimension");
  cmd->add_option("--conv-blocks", o.conv_blocks,
                  "Conv stack as <width>x<filters>[,...], e.g. 3x128,5x32");
  cmd->add_option("--hidden-dim", o.hidden_dim, "Hidden layer width");
  cmd->add_option("--dropout-rate", o.dropout_rate,
                  "Dropout rate after the hidden layer (default 0)");
  cmd->add_option("--use-bn", o.use_bn,
                  "Batch normalization in conv blocks: true/false");
  cmd->add_option("--activation", o.activation, "Nonlinearity: relu or tanh");
  cmd->add_option("--max-len-q", o.max_len_q, "Question length in characters");
  cmd->add_option("--max-len-a", o.max_len_a, "Answer length in characters");
  cmd->add_option("--lambda", o.lambda, "L2 penalty on conv filters");
  cmd->add_option("--adadelta-rho", o.adadelta_rho, "AdaDelta decay rate");
  cmd->add_option("--adadelta-eps", o.adadelta_eps, "AdaDelta epsilon");
  cmd->add_option("--batch-size", o.batch_size, "Minibatch size");
  cmd->add_option("--patience", o.patience, "Early-stopping patience");
  cmd->add_option("--max-epochs", o.max_epochs, "Maximum training epochs");
  cmd->add_option("--seed", o.seed, "RNG seed (base seed for experiment)");
  cmd->add_option("--bn-eps", o.bn_eps, "BN variance epsilon");
  cmd->add_option("--bn-momentum", o.bn_momentum, "BN running-stat momentum");
}

void apply_overrides(const CfgOverrides& o, RunConfig& cfg) {
  if (o.embed_dim) cfg.embed_dim = *o.embed_dim;
  if (o.conv_blocks) cfg.conv_blocks = parse_conv_blocks(*o.conv_blocks);
  if (o.hidden_dim) cfg.hidden_dim = *o.hidden_dim;
  if (o.dropout_rate) cfg.dropout_rate = *o.dropout_rate;
  if (o.use_bn) cfg.use_bn = parse_bool(*o.use_bn);
  if (o.activation) cfg.activation = parse_activation(*o.activation);
  if (o.max_len_q) cfg.max_len_q = *o.max_len_q;
  if (o.max_len_a) cfg.max_len_a = *o.max_len_a;
  if (o.lambda) cfg.lambda = *o.lambda;
  if (o.adadelta_rho) cfg.adadelta_rho = *o.adadelta_rho;
  if (o.adadelta_eps) cfg.adadelta_eps = *o.adadelta_eps;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.patience) cfg.patience = *o.patience;
  if (o.max_epochs) cfg.max_epochs = *o.max_epochs;
  if (o.seed) cfg.seed = *o.seed;
  if (o.bn_eps) cfg.bn_eps = *o.bn_eps;
  if (o.bn_momentum) cfg.bn_momentum = *o.bn_momentum;
}

// trecqa keeps the defaults; wikiqa shortens questions; canonical presets
// nothing. Applied before config file and flags so either can override.
void apply_dataset_preset(const std::string& dataset, RunConfig& cfg) {
  if (dataset == "wikiqa") {
    cfg.max_len_q = 125;
    cfg.max_len_a = 386;
  } else if (dataset == "trecqa") {
    cfg.max_len_q = 192;
    cfg.max_len_a = 386;
  } else if (dataset != "canonical" && !dataset.empty()) {
    throw config_error("unknown dataset '" + dataset +
                       "' (expected trecqa, wikiqa, or canonical)");
  }
}

RunConfig assemble_config(const std::string& dataset,
                          const std::string& config_path,
                          const CfgOverrides& overrides) {
  RunConfig cfg;
  apply_dataset_preset(dataset, cfg);
  if (!config_path.empty()) apply_config_file(config_path, cfg);
  apply_overrides(overrides, cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// Shared command plumbing
// ---------------------------------------------------------------------------

std::vector<QAPair> load_split(const std::string& dataset,
                               const std::string& path) {
  return dataset == "wikiqa" ? load_wikiqa_tsv(path)
                             : load_canonical_tsv(path);
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw io_error("cannot create output directory " + out + ": " +
                         ec.message());
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw io_error("write failed for " + path);
}

std::string stats_line(const char* split, const SplitStats& s) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s %d %d %.2f%%", split, s.n_questions,
                s.n_pairs, 100.0 * s.pct_correct);
  return buf;
}

std::vector<ScoredPair> score_split(const ModelParams& params,
                                    const RunConfig& cfg,
                                    const std::vector<EncodedPair>& pairs) {
  return score_pairs(params, cfg, pairs, cfg.batch_size);
}

// ---------------------------------------------------------------------------
// prepare: convert raw splits to canonical TSV and verify corpus statistics
// ---------------------------------------------------------------------------

struct PinnedStats {
  int n_questions;
  int n_pairs;
  double pct_correct;  // fraction
};

// Published corpus statistics the converted splits must reproduce
// (percentages are table-rounded, so they get a half-ulp-of-display margin).
const PinnedStats* pinned_stats(const std::string& dataset,
                                const std::string& split) {
  static const PinnedStats trecqa[3] = {
      {94, 4718, 0.074}, {65, 1117, 0.184}, {68, 1442, 0.172}};
  static const PinnedStats wikiqa[3] = {
      {2118, 20360, 0.0511}, {296, 2733, 0.0512}, {633, 6165, 0.0475}};
  const PinnedStats* table = nullptr;
  if (dataset == "trecqa") table = trecqa;
  else if (dataset == "wikiqa") table = wikiqa;
  else return nullptr;
  if (split == "train") return &table[0];
  if (split == "dev") return &table[1];
  if (split == "test") return &table[2];
  return nullptr;
}

int cmd_prepare(const std::string& dataset, const std::string& train,
                const std::string& dev, const std::string& test,
                const std::string& out, bool no_verify) {
  ensure_out_dir(out);
  bool mismatch = false;
  const std::pair<const char*, const std::string*> splits[3] = {
      {"train", &train}, {"dev", &dev}, {"test", &test}};
  for (const auto& [name, path] : splits) {
    if (path->empty()) continue;
    const std::vector<QAPair> pairs = load_split(dataset, *path);
    save_canonical_tsv(pairs, (fs::path(out) / (std::string(name) + ".tsv"))
                                  .string());
    const SplitStats stats = compute_stats(pairs);
    std::string line = stats_line(name, stats);
    if (!no_verify) {
      if (const PinnedStats* want = pinned_stats(dataset, name)) {
        const bool ok = stats.n_questions == want->n_questions &&
                        stats.n_pairs == want->n_pairs &&
                        std::fabs(stats.pct_correct - want->pct_correct) <
                            0.0005;
        if (!ok) {
          char buf[128];
          std::snprintf(buf, sizeof(buf),
                        "  MISMATCH: expected %d %d %.2f%%",
                        want->n_questions, want->n_pairs,
                        100.0 * want->pct_correct);
          line += buf;
          mismatch = true;
        }
      }
    }
    std::puts(line.c_str());
  }
  if (mismatch) {
    std::fputs("corpus statistics do not match the published table\n", stderr);
    return 3;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train / eval
// ---------------------------------------------------------------------------

void report_eval(const char* label, const EvalReport& report) {
  std::printf("%s map %.6f mrr %.6f evaluated %d skipped %d\n", label,
              report.map, report.mrr, report.n_evaluated, report.n_skipped);
}

int cmd_train(const std::string& dataset, const std::string& config_path,
              const CfgOverrides& overrides, const std::string& train_path,
              const std::string& dev_path, const std::string& test_path,
              const std::string& out, bool exact_bn_stats, int record_batches,
              const std::string& tag) {
  const RunConfig cfg = assemble_config(dataset, config_path, overrides);
  ensure_out_dir(out);

  const std::vector<QAPair> train_raw = load_split(dataset, train_path);
  const std::vector<QAPair> dev_raw = load_split(dataset, dev_path);
  const IdfTable idf = build_idf(train_raw);
  const std::vector<EncodedPair> train_pairs = encode_pairs(train_raw, cfg, idf);
  const std::vector<EncodedPair> dev_pairs = encode_pairs(dev_raw, cfg, idf);

  TrainOptions opts;
  opts.log = &std::cout;
  opts.record_batches = record_batches;
  opts.exact_bn_stats = exact_bn_stats;
  const TrainResult result = train(train_pairs, dev_pairs, cfg, opts);

  std::string log_text;
  for (std::size_t k = 0; k < result.history.epochs.size(); ++k) {
    log_text += format_epoch_line(static_cast<int>(k) + 1,
                                  result.history.epochs[k]);
    log_text += '\n';
  }
  write_text_file((fs::path(out) / "train.log").string(), log_text);
  if (record_batches > 0) {
    std::string losses;
    for (double v : result.batch_losses) {
      losses += detail::format_double(v);
      losses += '\n';
    }
    write_text_file((fs::path(out) / "batch_losses.txt").string(), losses);
  }
  save_checkpoint({cfg, result.params, idf},
                  (fs::path(out) / "checkpoint.json").string());
  std::printf("best_epoch %d\n", result.history.best_epoch);

  if (!test_path.empty()) {
    const std::vector<QAPair> test_raw = load_split(dataset, test_path);
    const std::vector<EncodedPair> test_pairs =
        encode_pairs(test_raw, cfg, idf);
    const std::vector<ScoredPair> scored =
        score_split(result.params, cfg, test_pairs);
    write_trec_run(scored, tag, (fs::path(out) / "run.txt").string());
    write_qrels(test_raw, (fs::path(out) / "qrels.txt").string());
    report_eval("test", evaluate(scored));
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& test_path,
             const std::string& out, const std::string& tag) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const std::vector<QAPair> raw = load_canonical_tsv(test_path);
  const std::vector<EncodedPair> pairs = encode_pairs(raw, ckpt.config,
                                                      ckpt.idf);
  const std::vector<ScoredPair> scored =
      score_split(ckpt.params, ckpt.config, pairs);
  if (!out.empty()) {
    ensure_out_dir(out);
    write_trec_run(scored, tag, (fs::path(out) / "run.txt").string());
    write_qrels(raw, (fs::path(out) / "qrels.txt").string());
  }
  report_eval("eval", evaluate(scored));
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

int cmd_gradcheck(int batch, std::uint64_t seed, double h) {
  RunConfig cfg;
  cfg.embed_dim = 4;
  cfg.conv_blocks = {{2, 3}};
  cfg.hidden_dim = 5;
  cfg.max_len_q = 8;
  cfg.max_len_a = 8;
  const GradCheckResult r = grad_check(cfg, batch, seed, h);
  const bool pass = r.max_rel_err < 1e-5;
  std::printf("gradcheck max_rel_err %.3e over %zu parameters: %s\n",
              r.max_rel_err, r.n_checked, pass ? "PASS" : "FAIL");
  if (!pass) {
    std::printf("worst: span %zu index %zu analytic %.6e numeric %.6e\n",
                r.worst_span, r.worst_index, r.worst_analytic,
                r.worst_numeric);
  }
  return pass ? 0 : 3;
}

// ---------------------------------------------------------------------------
// experiment: n independent seeds, aggregate mean / std-dev / variance
// ---------------------------------------------------------------------------

struct SeedOutcome {
  std::uint64_t seed;
  int best_epoch;
  double map;
  double mrr;
};

void report_aggregate(const char* metric,
                      const std::vector<double>& values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double variance = 0.0;  // sample variance, n-1 denominator
  if (values.size() > 1) {
    for (double v : values) variance += (v - mean) * (v - mean);
    variance /= static_cast<double>(values.size() - 1);
  }
  std::printf("%s %.4f ± %.4f variance %.3e\n", metric, mean,
              std::sqrt(variance), variance);
}

int cmd_experiment(const std::string& dataset, const std::string& config_path,
                   const CfgOverrides& overrides,
                   const std::string& train_path, const std::string& dev_path,
                   const std::string& test_path, const std::string& out,
                   int n_seeds, const std::string& tag) {
  if (n_seeds < 1) throw config_error("--seeds must be >= 1");
  const RunConfig base_cfg = assemble_config(dataset, config_path, overrides);
  ensure_out_dir(out);

  const std::vector<QAPair> train_raw = load_split(dataset, train_path);
  const std::vector<QAPair> dev_raw = load_split(dataset, dev_path);
  const std::vector<QAPair> test_raw = load_split(dataset, test_path);
  const IdfTable idf = build_idf(train_raw);

  std::vector<SeedOutcome> outcomes;
  for (int k = 0; k < n_seeds; ++k) {
    RunConfig cfg = base_cfg;
    cfg.seed = base_cfg.seed + static_cast<std::uint64_t>(k);
    const std::vector<EncodedPair> train_pairs =
        encode_pairs(train_raw, cfg, idf);
    const std::vector<EncodedPair> dev_pairs = encode_pairs(dev_raw, cfg, idf);
    const std::vector<EncodedPair> test_pairs =
        encode_pairs(test_raw, cfg, idf);

    const TrainResult result = train(train_pairs, dev_pairs, cfg);
    std::string log_text;
    for (std::size_t e = 0; e < result.history.epochs.size(); ++e) {
      log_text += format_epoch_line(static_cast<int>(e) + 1,
                                    result.history.epochs[e]);
      log_text += '\n';
    }
    const std::string suffix = "_seed" + std::to_string(cfg.seed);
    write_text_file((fs::path(out) / ("train" + suffix + ".log")).string(),
                    log_text);

    const std::vector<ScoredPair> scored =
        score_split(result.params, cfg, test_pairs);
    write_trec_run(scored, tag,
                   (fs::path(out) / ("run" + suffix + ".txt")).string());
    const EvalReport report = evaluate(scored);
    outcomes.push_back({cfg.seed, result.history.best_epoch, report.map,
                        report.mrr});
    std::printf("seed %llu best_epoch %d test_map %.6f test_mrr %.6f\n",
                static_cast<unsigned long long>(cfg.seed),
                result.history.best_epoch, report.map, report.mrr);
    std::fflush(stdout);
  }

  std::string tsv = "seed\tbest_epoch\ttest_map\ttest_mrr\n";
  for (const SeedOutcome& o : outcomes) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%llu\t%d\t%.6f\t%.6f\n",
                  static_cast<unsigned long long>(o.seed), o.best_epoch, o.map,
                  o.mrr);
    tsv += buf;
  }
  write_text_file((fs::path(out) / "experiment.tsv").string(), tsv);

  std::vector<double> maps, mrrs;
  for (const SeedOutcome& o : outcomes) {
    maps.push_back(o.map);
    mrrs.push_back(o.mrr);
  }
  report_aggregate("map", maps);
  report_aggregate("mrr", mrrs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Character-level convolutional question-answer ranking"};
  app.require_subcommand(1);

  // alphabet dump
  CLI::App* alphabet = app.add_subcommand(
      "alphabet", "Inspect the fixed character table");
  alphabet->require_subcommand(1);
  alphabet->add_subcommand("dump",
                           "Print the 71 character tokens, one per line");

  // prepare
  CLI::App* prepare = app.add_subcommand(
      "prepare", "Convert raw splits to canonical TSV and check statistics");
  std::string p_dataset, p_train, p_dev, p_test, p_out;
  bool p_no_verify = false;
  prepare->add_option("--dataset", p_dataset,
                      "trecqa, wikiqa, or canonical")->required();
  prepare->add_option("--train", p_train, "Raw train split");
  prepare->add_option("--dev", p_dev, "Raw dev split");
  prepare->add_option("--test", p_test, "Raw test split");
  prepare->add_option("--out", p_out, "Output directory")->required();
  prepare->add_flag("--no-verify", p_no_verify,
                    "Skip the published-statistics check");

  // train
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  std::string t_dataset = "canonical", t_config, t_train, t_dev, t_test,
              t_out, t_tag = "csr";
  bool t_exact_bn = false;
  int t_record_batches = 0;
  CfgOverrides t_overrides;
  train_cmd->add_option("--dataset", t_dataset,
                        "trecqa, wikiqa, or canonical (default)");
  train_cmd->add_option("--config", t_config, "key = value config file");
  train_cmd->add_option("--train", t_train, "Train split")->required();
  train_cmd->add_option("--dev", t_dev, "Dev split")->required();
  train_cmd->add_option("--test", t_test,
                        "Optional test split, evaluated after training");
  train_cmd->add_option("--out", t_out, "Output directory")->required();
  train_cmd->add_flag("--exact-bn-stats", t_exact_bn,
                      "Recompute BN statistics over the whole train set");
  train_cmd->add_option("--record-batches", t_record_batches,
                        "Write the first K minibatch losses");
  train_cmd->add_option("--tag", t_tag, "Run-file tag");
  add_config_flags(train_cmd, t_overrides);

  // eval
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Score a split with a saved checkpoint");
  std::string e_checkpoint, e_test, e_out, e_tag = "csr";
  eval_cmd->add_option("--checkpoint", e_checkpoint, "Checkpoint file")
      ->required();
  eval_cmd->add_option("--test", e_test, "Canonical TSV to score")->required();
  eval_cmd->add_option("--out", e_out,
                       "Optional directory for run and qrel files");
  eval_cmd->add_option("--tag", e_tag, "Run-file tag");

  // gradcheck
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference check of the full backward pass");
  int g_batch = 3;
  std::uint64_t g_seed = 7;
  double g_h = 1e-5;
  gradcheck->add_option("--batch", g_batch, "Synthetic batch size");
  gradcheck->add_option("--seed", g_seed, "RNG seed");
  gradcheck->add_option("--step", g_h, "Finite-difference step");

  // experiment
  CLI::App* experiment = app.add_subcommand(
      "experiment", "Train and evaluate across consecutive seeds");
  std::string x_dataset = "canonical", x_config, x_train, x_dev, x_test,
              x_out, x_tag = "csr";
  int x_seeds = 10;
  CfgOverrides x_overrides;
  experiment->add_option("--dataset", x_dataset,
                         "trecqa, wikiqa, or canonical (default)");
  experiment->add_option("--config", x_config, "key = value config file");
  experiment->add_option("--train", x_train, "Train split")->required();
  experiment->add_option("--dev", x_dev, "Dev split")->required();
  experiment->add_option("--test", x_test, "Test split")->required();
  experiment->add_option("--out", x_out, "Output directory")->required();
  experiment->add_option("--seeds", x_seeds,
                         "Number of consecutive seeds (default 10)");
  experiment->add_option("--tag", x_tag, "Run-file tag");
  add_config_flags(experiment, x_overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 1;
  }

  try {
    if (alphabet->parsed()) {
      std::fputs(build_alphabet().dump().c_str(), stdout);
      return 0;
    }
    if (prepare->parsed()) {
      if (p_train.empty() && p_dev.empty() && p_test.empty()) {
        throw config_error(
            "prepare needs at least one of --train, --dev, --test");
      }
      return cmd_prepare(p_dataset, p_train, p_dev, p_test, p_out,
                         p_no_verify);
    }
    if (train_cmd->parsed()) {
      return cmd_train(t_dataset, t_config, t_overrides, t_train, t_dev,
                       t_test, t_out, t_exact_bn, t_record_batches, t_tag);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(e_checkpoint, e_test, e_out, e_tag);
    }
    if (gradcheck->parsed()) {
      return cmd_gradcheck(g_batch, g_seed, g_h);
    }
    if (experiment->parsed()) {
      return cmd_experiment(x_dataset, x_config, x_overrides, x_train, x_dev,
                            x_test, x_out, x_seeds, x_tag);
    }
  } catch (const config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const io_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 2;
  } catch (const parse_error& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const format_error& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return 2;
  } catch (const load_error& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return 2;
  } catch (const eval_error& e) {
    std::fprintf(stderr, "evaluation error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
