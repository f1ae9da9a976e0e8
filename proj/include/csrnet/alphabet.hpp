#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "csrnet/errors.hpp"

namespace csrnet {

// Fixed-length character-index encoding of one sentence. Positions past
// true_len are padding; positions before it may still hold the pad index
// (inter-word gaps encode as pad).
struct EncodedSentence {
  std::vector<int> indices;
  int true_len = 0;
};

// The fixed 71-symbol character set: index 0 is padding, 1-26 are a-z,
// 27-36 are 0-9, 37-68 are the 32 punctuation symbols below, 69 is
// newline, 70 is unknown. The ordering is frozen; encodings depend on it.
class CharAlphabet {
 public:
  static constexpr int kSize = 71;
  static constexpr std::string_view kPunct = R"(,;.!?:'"/\|_@#$%^&*~`+-=<>()[]{})";

  CharAlphabet() {
    ascii_to_index_.fill(-1);
    tokens_.reserve(kSize);
    tokens_.emplace_back("<pad>");
    for (char c = 'a'; c <= 'z'; ++c) add_char(c);
    for (char c = '0'; c <= '9'; ++c) add_char(c);
    for (char c : kPunct) add_char(c);
    ascii_to_index_[static_cast<unsigned char>('\n')] =
        static_cast<int>(tokens_.size());
    tokens_.emplace_back("<newline>");
    tokens_.emplace_back("<unk>");
  }

  int size() const { return kSize; }
  int pad_index() const { return 0; }
  int newline_index() const { return 69; }
  int unk_index() const { return 70; }

  // -1 for characters outside the set (the caller decides pad/unk).
  int index_of(char c) const {
    return ascii_to_index_[static_cast<unsigned char>(c)];
  }

  // Display token for an index: the character itself, or a named
  // placeholder for pad/newline/unknown.
  const std::string& token(int index) const {
    if (index < 0 || index >= kSize) {
      throw contract_error("alphabet index out of range: " +
                           std::to_string(index));
    }
    return tokens_[static_cast<std::size_t>(index)];
  }

  // One token per line, 71 lines. This is the bit-exact fixture surface.
  std::string dump() const {
    std::string out;
    for (const auto& t : tokens_) {
      out += t;
      out += '\n';
    }
    return out;
  }

  // FNV-1a 64 over the dump text; stored in checkpoints to pin the table.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : dump()) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return h;
  }

 private:
  void add_char(char c) {
    ascii_to_index_[static_cast<unsigned char>(c)] =
        static_cast<int>(tokens_.size());
    tokens_.emplace_back(1, c);
  }

  std::array<int, 256> ascii_to_index_;
  std::vector<std::string> tokens_;
};

inline const CharAlphabet& build_alphabet() {
  static const CharAlphabet alphabet;
  return alphabet;
}

namespace detail {

// Length of the UTF-8 sequence starting at s[i], clamped to what is
// actually present and well-formed; malformed bytes count as length 1.
inline std::size_t utf8_seq_len(std::string_view s, std::size_t i) {
  unsigned char lead = static_cast<unsigned char>(s[i]);
  std::size_t n = 1;
  if ((lead & 0xE0) == 0xC0) n = 2;
  else if ((lead & 0xF0) == 0xE0) n = 3;
  else if ((lead & 0xF8) == 0xF0) n = 4;
  else if (lead >= 0x80) return 1;  // stray continuation or invalid lead
  if (i + n > s.size()) return 1;
  for (std::size_t k = 1; k < n; ++k) {
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 1;
  }
  return n;
}

}  // namespace detail

// Lowercases, maps space/tab to pad and out-of-set symbols (including any
// non-ASCII sequence, taken as one symbol) to unknown, truncates at
// max_len, right-pads. Total on any byte string; locale-independent.
inline EncodedSentence encode(std::string_view text, int max_len,
                              const CharAlphabet& alphabet) {
  if (max_len <= 0) throw contract_error("encode: max_len must be positive");
  EncodedSentence out;
  out.indices.assign(static_cast<std::size_t>(max_len), alphabet.pad_index());
  int n = 0;
  std::size_t i = 0;
  while (i < text.size() && n < max_len) {
    unsigned char lead = static_cast<unsigned char>(text[i]);
    int idx;
    if (lead < 0x80) {
      char c = static_cast<char>(lead);
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      if (c == ' ' || c == '\t') {
        idx = alphabet.pad_index();
      } else {
        idx = alphabet.index_of(c);
        if (idx < 0) idx = alphabet.unk_index();
      }
      ++i;
    } else {
      idx = alphabet.unk_index();
      i += detail::utf8_seq_len(text, i);
    }
    out.indices[static_cast<std::size_t>(n++)] = idx;
  }
  out.true_len = n;
  return out;
}

}  // namespace csrnet
