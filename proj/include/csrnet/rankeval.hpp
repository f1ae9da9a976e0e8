#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "csrnet/dataio.hpp"
#include "csrnet/errors.hpp"

namespace csrnet {

struct ScoredPair {
  std::string qid;
  std::string aid;
  double score = 0.0;
  int label = 0;
};

struct RankedEntry {
  std::string aid;
  double score = 0.0;
  int label = 0;
};

// Entries sorted by score descending; ties keep the original input order,
// which makes every ranking a total, deterministic order.
struct RankedQuery {
  std::string qid;
  std::vector<RankedEntry> entries;

  bool has_positive() const {
    for (const RankedEntry& e : entries) {
      if (e.label == 1) return true;
    }
    return false;
  }
  bool has_negative() const {
    for (const RankedEntry& e : entries) {
      if (e.label == 0) return true;
    }
    return false;
  }
  bool evaluable() const { return has_positive() && has_negative(); }
};

struct PerQueryScore {
  std::string qid;
  double ap = 0.0;
  double rr = 0.0;
};

struct EvalReport {
  double map = 0.0;
  double mrr = 0.0;
  std::vector<PerQueryScore> per_query;  // evaluable queries, input order
  int n_evaluated = 0;
  int n_skipped = 0;
};

// Groups by qid (first-seen order) and stable-sorts each group by score
// descending.
inline std::vector<RankedQuery> rank_queries(
    const std::vector<ScoredPair>& scored) {
  std::vector<RankedQuery> queries;
  std::unordered_map<std::string, std::size_t> index;
  for (const ScoredPair& s : scored) {
    auto [it, inserted] = index.emplace(s.qid, queries.size());
    if (inserted) {
      queries.push_back(RankedQuery{s.qid, {}});
    }
    queries[it->second].entries.push_back(RankedEntry{s.aid, s.score, s.label});
  }
  for (RankedQuery& q : queries) {
    std::stable_sort(
        q.entries.begin(), q.entries.end(),
        [](const RankedEntry& a, const RankedEntry& b) { return a.score > b.score; });
  }
  return queries;
}

// AP = (1/R) Σ_{ranks k with label 1} precision@k, over the sorted entries.
inline double average_precision(const RankedQuery& q) {
  if (!q.evaluable()) {
    throw contract_error("average_precision needs a positive and a negative");
  }
  int relevant_seen = 0;
  double acc = 0.0;
  for (std::size_t k = 0; k < q.entries.size(); ++k) {
    if (q.entries[k].label == 1) {
      ++relevant_seen;
      acc += static_cast<double>(relevant_seen) / static_cast<double>(k + 1);
    }
  }
  return acc / relevant_seen;
}

// 1 / (1-based rank of the first relevant entry).
inline double reciprocal_rank(const RankedQuery& q) {
  if (!q.evaluable()) {
    throw contract_error("reciprocal_rank needs a positive and a negative");
  }
  for (std::size_t k = 0; k < q.entries.size(); ++k) {
    if (q.entries[k].label == 1) return 1.0 / static_cast<double>(k + 1);
  }
  return 0.0;  // unreachable: evaluable() guarantees a positive
}

// A query counts toward MAP/MRR only when it has at least one correct and
// one incorrect candidate; everything else is reported as skipped, since
// silent filtering hides protocol differences on datasets with many
// all-negative questions.
inline EvalReport evaluate(const std::vector<ScoredPair>& scored) {
  EvalReport report;
  for (const RankedQuery& q : rank_queries(scored)) {
    if (!q.evaluable()) {
      ++report.n_skipped;
      continue;
    }
    PerQueryScore s;
    s.qid = q.qid;
    s.ap = average_precision(q);
    s.rr = reciprocal_rank(q);
    report.map += s.ap;
    report.mrr += s.rr;
    report.per_query.push_back(std::move(s));
    ++report.n_evaluated;
  }
  if (report.n_evaluated == 0) {
    throw eval_error("no query has both a correct and an incorrect answer");
  }
  report.map /= report.n_evaluated;
  report.mrr /= report.n_evaluated;
  return report;
}

// TREC run format: `qid Q0 aid rank score tag`, rank 1-based after sorting,
// score with 6 decimal places, space-separated, LF-terminated.
inline void write_trec_run(const std::vector<ScoredPair>& scored,
                           const std::string& tag, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path + " for writing");
  char score_buf[64];
  for (const RankedQuery& q : rank_queries(scored)) {
    for (std::size_t k = 0; k < q.entries.size(); ++k) {
      std::snprintf(score_buf, sizeof(score_buf), "%.6f", q.entries[k].score);
      out << q.qid << " Q0 " << q.entries[k].aid << ' ' << k + 1 << ' '
          << score_buf << ' ' << tag << '\n';
    }
  }
  if (!out) throw io_error("write failed for " + path);
}

// Relevance judgments: `qid 0 aid label`.
inline void write_qrels(const std::vector<QAPair>& pairs,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path + " for writing");
  for (const QAPair& p : pairs) {
    out << p.qid << " 0 " << p.aid << ' ' << p.label << '\n';
  }
  if (!out) throw io_error("write failed for " + path);
}

}  // namespace csrnet
