#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "csrnet/dataio.hpp"
#include "csrnet/errors.hpp"

namespace csrnet {

// Word-level IDF statistics built from one corpus; a "document" is a single
// answer sentence. Unseen words fall back to default_idf.
struct IdfTable {
  std::unordered_map<std::string, double> idf;
  long n_docs = 0;
  double default_idf = 1.0;

  double lookup(const std::string& w) const {
    auto it = idf.find(w);
    return it == idf.end() ? default_idf : it->second;
  }
};

namespace detail {

inline bool is_space_char(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_punct_char(char c) {
  const unsigned char u = static_cast<unsigned char>(c);
  return (u >= '!' && u <= '/') || (u >= ':' && u <= '@') ||
         (u >= '[' && u <= '`') || (u >= '{' && u <= '~');
}

// Shortest representation that parses back to the identical double.
inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// Lowercases ASCII, splits on whitespace, strips leading/trailing
// punctuation from each token, and drops tokens that end up empty.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && detail::is_space_char(text[i])) ++i;
    std::size_t start = i;
    while (i < n && !detail::is_space_char(text[i])) ++i;
    if (i == start) continue;
    std::size_t lo = start;
    std::size_t hi = i;
    while (lo < hi && detail::is_punct_char(text[lo])) ++lo;
    while (hi > lo && detail::is_punct_char(text[hi - 1])) --hi;
    if (lo == hi) continue;
    std::string tok = text.substr(lo, hi - lo);
    for (char& c : tok) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

namespace detail {

inline std::unordered_set<std::string> to_set(
    const std::vector<std::string>& tokens) {
  return std::unordered_set<std::string>(tokens.begin(), tokens.end());
}

}  // namespace detail

// |q ∩ a| / (|q| + |a|) over token sets; 0 for two empty sets. Bounded by
// 0.5, attained exactly when the sets coincide.
inline double word_overlap(const std::vector<std::string>& q_tokens,
                           const std::vector<std::string>& a_tokens) {
  const auto qs = detail::to_set(q_tokens);
  const auto as = detail::to_set(a_tokens);
  if (qs.empty() && as.empty()) return 0.0;
  long inter = 0;
  for (const std::string& w : qs) {
    if (as.count(w)) ++inter;
  }
  return static_cast<double>(inter) /
         static_cast<double>(qs.size() + as.size());
}

// idf(w) = ln((n_docs + 1)/(df(w) + 1)) + 1, computed over answer
// sentences. Callers must pass the training split only; building the table
// from dev or test text would leak evaluation data into the features.
inline IdfTable build_idf(const std::vector<QAPair>& corpus) {
  if (corpus.empty()) throw config_error("IDF corpus is empty");
  std::unordered_map<std::string, long> df;
  for (const QAPair& p : corpus) {
    const auto words = detail::to_set(tokenize(p.answer));
    for (const std::string& w : words) ++df[w];
  }
  IdfTable table;
  table.n_docs = static_cast<long>(corpus.size());
  table.default_idf = std::log(static_cast<double>(table.n_docs) + 1.0) + 1.0;
  for (const auto& [w, count] : df) {
    table.idf[w] = std::log((static_cast<double>(table.n_docs) + 1.0) /
                            (static_cast<double>(count) + 1.0)) +
                   1.0;
  }
  return table;
}

// Σ_{w ∈ q∩a} idf(w) / Σ_{w ∈ q∪a} idf(w); 0 when the union is empty.
inline double idf_overlap(const std::vector<std::string>& q_tokens,
                          const std::vector<std::string>& a_tokens,
                          const IdfTable& table) {
  const auto qs = detail::to_set(q_tokens);
  const auto as = detail::to_set(a_tokens);
  double inter = 0.0;
  double uni = 0.0;
  for (const std::string& w : qs) {
    const double v = table.lookup(w);
    uni += v;
    if (as.count(w)) inter += v;
  }
  for (const std::string& w : as) {
    if (!qs.count(w)) uni += table.lookup(w);
  }
  if (uni == 0.0) return 0.0;
  return inter / uni;
}

// TSV serialization: header line "n_docs\t<N>", then one "word\t<idf>" row
// per word in lexicographic order. Doubles round-trip exactly.
inline void save_idf(const IdfTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path + " for writing");
  out << "n_docs\t" << table.n_docs << '\n';
  std::set<std::string> words;
  for (const auto& [w, v] : table.idf) words.insert(w);
  for (const std::string& w : words) {
    out << w << '\t' << detail::format_double(table.idf.at(w)) << '\n';
  }
  if (!out) throw io_error("write failed for " + path);
}

inline IdfTable load_idf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  IdfTable table;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    detail::chomp_cr(line);
    if (line.empty()) continue;
    std::vector<std::string> f = detail::split_tabs(line);
    if (f.size() != 2) {
      throw parse_error("expected 2 tab-separated fields", line_no);
    }
    if (!have_header) {
      if (f[0] != "n_docs") {
        throw parse_error("expected n_docs header", line_no);
      }
      try {
        table.n_docs = std::stol(f[1]);
      } catch (const std::exception&) {
        throw parse_error("bad n_docs value \"" + f[1] + "\"", line_no);
      }
      if (table.n_docs <= 0) {
        throw parse_error("n_docs must be positive", line_no);
      }
      table.default_idf =
          std::log(static_cast<double>(table.n_docs) + 1.0) + 1.0;
      have_header = true;
      continue;
    }
    double v = 0.0;
    const auto res = std::from_chars(f[1].data(), f[1].data() + f[1].size(), v);
    if (res.ec != std::errc() || res.ptr != f[1].data() + f[1].size()) {
      throw parse_error("bad idf value \"" + f[1] + "\"", line_no);
    }
    table.idf[f[0]] = v;
  }
  if (!have_header) throw parse_error("missing n_docs header", 1);
  return table;
}

}  // namespace csrnet
