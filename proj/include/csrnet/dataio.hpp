#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "csrnet/errors.hpp"

namespace csrnet {

// One question/candidate-answer row. Text is stored verbatim; lowercasing
// and tokenization happen downstream so there is a single normalization
// point.
struct QAPair {
  std::string qid;
  std::string aid;
  std::string question;
  std::string answer;
  int label = 0;

  bool operator==(const QAPair&) const = default;
};

struct SplitStats {
  int n_questions = 0;
  int n_pairs = 0;
  double pct_correct = 0.0;  // fraction in [0, 1]
};

namespace detail {

// Splits on '\t' only; empty fields are preserved.
inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline void chomp_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline int parse_label(const std::string& s, std::size_t line_no) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw parse_error("label must be 0 or 1, got \"" + s + "\"", line_no);
}

// Shared row-level validation: (qid, aid) must be unique and every row of a
// qid must repeat the first-seen question text.
class RowChecker {
 public:
  void check(const QAPair& p, std::size_t line_no) {
    if (!seen_keys_.insert(p.qid + "\t" + p.aid).second) {
      throw parse_error("duplicate (qid, aid) pair " + p.qid + "/" + p.aid,
                        line_no);
    }
    auto [it, inserted] = question_text_.emplace(p.qid, p.question);
    if (!inserted && it->second != p.question) {
      throw parse_error("question text differs from earlier rows of qid " +
                            p.qid,
                        line_no);
    }
  }

 private:
  std::unordered_set<std::string> seen_keys_;
  std::unordered_map<std::string, std::string> question_text_;
};

}  // namespace detail

// Canonical split format: UTF-8, LF, no header, five tab-separated columns
// per line: qid, question, aid, answer, label.
inline std::vector<QAPair> load_canonical_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::vector<QAPair> pairs;
  detail::RowChecker checker;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::chomp_cr(line);
    if (line.empty()) continue;
    std::vector<std::string> f = detail::split_tabs(line);
    if (f.size() != 5) {
      throw parse_error("expected 5 tab-separated fields, got " +
                            std::to_string(f.size()),
                        line_no);
    }
    QAPair p;
    p.qid = std::move(f[0]);
    p.question = std::move(f[1]);
    p.aid = std::move(f[2]);
    p.answer = std::move(f[3]);
    p.label = detail::parse_label(f[4], line_no);
    checker.check(p, line_no);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

inline void save_canonical_tsv(const std::vector<QAPair>& pairs,
                               const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path + " for writing");
  for (const QAPair& p : pairs) {
    out << p.qid << '\t' << p.question << '\t' << p.aid << '\t' << p.answer
        << '\t' << p.label << '\n';
  }
  if (!out) throw io_error("write failed for " + path);
}

// Adapter for the published WikiQA layout: a header row followed by rows of
// QuestionID, Question, DocumentID, DocumentTitle, SentenceID, Sentence,
// Label. Only the five canonical columns survive the mapping.
inline std::vector<QAPair> load_wikiqa_tsv(const std::string& path) {
  static const std::vector<std::string> kHeader = {
      "QuestionID", "Question", "DocumentID", "DocumentTitle",
      "SentenceID", "Sentence",  "Label"};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw format_error("missing header row in " + path);
  }
  detail::chomp_cr(line);
  if (detail::split_tabs(line) != kHeader) {
    throw format_error("unexpected header in " + path);
  }
  std::vector<QAPair> pairs;
  detail::RowChecker checker;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::chomp_cr(line);
    if (line.empty()) continue;
    std::vector<std::string> f = detail::split_tabs(line);
    if (f.size() != kHeader.size()) {
      throw parse_error("expected " + std::to_string(kHeader.size()) +
                            " tab-separated fields, got " +
                            std::to_string(f.size()),
                        line_no);
    }
    QAPair p;
    p.qid = std::move(f[0]);
    p.question = std::move(f[1]);
    p.aid = std::move(f[4]);
    p.answer = std::move(f[5]);
    p.label = detail::parse_label(f[6], line_no);
    checker.check(p, line_no);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

inline SplitStats compute_stats(const std::vector<QAPair>& pairs) {
  SplitStats s;
  s.n_pairs = static_cast<int>(pairs.size());
  std::unordered_set<std::string> qids;
  long positives = 0;
  for (const QAPair& p : pairs) {
    qids.insert(p.qid);
    positives += p.label;
  }
  s.n_questions = static_cast<int>(qids.size());
  s.pct_correct =
      s.n_pairs == 0 ? 0.0 : static_cast<double>(positives) / s.n_pairs;
  return s;
}

}  // namespace csrnet
