#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "csrnet/features.hpp"
#include "support/tmpfile.hpp"

using namespace csrnet;
using testsupport::TmpDir;

TEST_CASE("tokenizer lowercases, splits, and strips edge punctuation") {
  CHECK(tokenize("Who won, really?") ==
        std::vector<std::string>{"who", "won", "really"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("a  b") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("...") .empty());
  CHECK(tokenize("it's") == std::vector<std::string>{"it's"});
  CHECK(tokenize("(U.S.)") == std::vector<std::string>{"u.s"});
  CHECK(tokenize(" \t x \n") == std::vector<std::string>{"x"});
}

TEST_CASE("word overlap follows the set formula") {
  CHECK(word_overlap({"a", "b"}, {"b", "c"}) == 0.25);
  CHECK(word_overlap({"a", "b", "c"}, {"a", "b", "c"}) == 0.5);
  CHECK(word_overlap({"a"}, {"b"}) == 0.0);
  CHECK(word_overlap({}, {}) == 0.0);
  CHECK(word_overlap({"a"}, {}) == 0.0);
  // duplicates collapse into the set
  CHECK(word_overlap({"a", "a", "b"}, {"b", "b"}) ==
        word_overlap({"a", "b"}, {"b"}));
}

TEST_CASE("overlap features are symmetric and bounded") {
  const std::vector<std::string> q{"who", "won", "the", "game"};
  const std::vector<std::string> a{"the", "game", "was", "won", "early"};
  CHECK(word_overlap(q, a) == word_overlap(a, q));
  CHECK(word_overlap(q, a) >= 0.0);
  CHECK(word_overlap(q, a) <= 0.5);
  IdfTable t;
  t.n_docs = 10;
  t.default_idf = 2.0;
  CHECK(idf_overlap(q, a, t) == idf_overlap(a, q, t));
  CHECK(idf_overlap(q, a, t) >= 0.0);
  CHECK(idf_overlap(q, a, t) <= 1.0);
}

TEST_CASE("idf of a word in every document is exactly one") {
  std::vector<QAPair> corpus;
  for (int i = 0; i < 9; ++i) {
    corpus.push_back({"q" + std::to_string(i), "a0", "q",
                      "common filler" + std::to_string(i), 0});
  }
  IdfTable t = build_idf(corpus);
  CHECK(t.n_docs == 9);
  CHECK(t.idf.at("common") == Catch::Approx(1.0));
  // df = 1 → ln(10/2) + 1
  CHECK(t.idf.at("filler3") == Catch::Approx(std::log(5.0) + 1.0));
  // unseen words take the maximal smoothed value
  CHECK(t.default_idf == Catch::Approx(std::log(10.0) + 1.0));
  CHECK(t.lookup("never-seen") == t.default_idf);
}

TEST_CASE("a document counts each word once") {
  std::vector<QAPair> corpus = {
      {"q1", "a1", "q", "dog dog dog", 0},
      {"q2", "a1", "q", "cat", 0},
  };
  IdfTable t = build_idf(corpus);
  // df(dog) = 1 despite three occurrences
  CHECK(t.idf.at("dog") == Catch::Approx(std::log(3.0 / 2.0) + 1.0));
}

TEST_CASE("idf overlap endpoints") {
  IdfTable t;
  t.n_docs = 4;
  t.default_idf = 1.5;
  CHECK(idf_overlap({"a", "b"}, {"c"}, t) == 0.0);
  CHECK(idf_overlap({"a", "b"}, {"a", "b"}, t) == 1.0);
  CHECK(idf_overlap({}, {}, t) == 0.0);
}

TEST_CASE("adding a shared word never lowers idf overlap") {
  IdfTable t;
  t.n_docs = 100;
  t.default_idf = 2.0;
  t.idf = {{"x", 3.0}, {"y", 1.0}, {"z", 0.5}, {"w", 4.0}};
  std::vector<std::string> q{"x", "y"};
  std::vector<std::string> a{"y", "z"};
  const double before = idf_overlap(q, a, t);
  for (const char* added : {"w", "novel"}) {
    std::vector<std::string> q2 = q;
    std::vector<std::string> a2 = a;
    q2.push_back(added);
    a2.push_back(added);
    CHECK(idf_overlap(q2, a2, t) >= before);
  }
}

TEST_CASE("empty corpus is a configuration error") {
  CHECK_THROWS_AS(build_idf({}), config_error);
}

TEST_CASE("idf table round-trips through its TSV form") {
  std::vector<QAPair> corpus = {
      {"q1", "a1", "who?", "the dog ran home", 1},
      {"q1", "a2", "who?", "a cat slept", 0},
      {"q2", "a1", "where?", "home again, home", 1},
  };
  IdfTable t = build_idf(corpus);
  TmpDir tmp;
  const std::string p = tmp.path("idf.tsv");
  save_idf(t, p);
  IdfTable back = load_idf(p);
  CHECK(back.n_docs == t.n_docs);
  CHECK(back.default_idf == t.default_idf);
  REQUIRE(back.idf.size() == t.idf.size());
  for (const auto& [w, v] : t.idf) {
    REQUIRE(back.idf.count(w) == 1);
    CHECK(back.idf.at(w) == v);  // bit-exact
  }
  // serialization itself is deterministic
  const std::string p2 = tmp.path("idf2.tsv");
  save_idf(back, p2);
  CHECK(testsupport::read_file(p) == testsupport::read_file(p2));
}

TEST_CASE("idf loader rejects malformed tables") {
  TmpDir tmp;
  CHECK_THROWS_AS(load_idf(tmp.write("nohdr.tsv", "dog\t1.5\n")), parse_error);
  CHECK_THROWS_AS(load_idf(tmp.write("empty.tsv", "")), parse_error);
  CHECK_THROWS_AS(load_idf(tmp.write("badn.tsv", "n_docs\tmany\n")),
                  parse_error);
  CHECK_THROWS_AS(
      load_idf(tmp.write("badval.tsv", "n_docs\t3\ndog\tfast\n")),
      parse_error);
  CHECK_THROWS_AS(load_idf(tmp.write("cols.tsv", "n_docs\t3\ndog\n")),
                  parse_error);
  CHECK_THROWS_AS(load_idf(tmp.path("missing.tsv")), io_error);
}
