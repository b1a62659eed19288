#include <numeric>
#include <sstream>

#include "doctest.h"
#include "support/fixtures.hpp"
#include "tempora/corpus.hpp"
#include "tempora/errors.hpp"

using namespace tempora;
using fixtures::TempDir;

TEST_SUITE("corpus") {

TEST_CASE("document merges repeated terms and rejects degenerate input") {
  Document d({{2, 1}, {0, 2}, {2, 3}});
  REQUIRE(d.entries().size() == 2);
  CHECK(d.entries()[0] == Document::Entry{0, 2});
  CHECK(d.entries()[1] == Document::Entry{2, 4});
  CHECK(d.length() == 6);
  CHECK(d.count(1) == 0);
  CHECK_THROWS_AS(Document({}), InputError);
  CHECK_THROWS_AS(Document({{0, 0}}), InputError);
}

TEST_CASE("slice grammar") {
  std::istringstream in("# comment\na:2 b:1\nb c c\n");
  const auto docs = parse_slice(in, "mem.bow");
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].counts.size() == 2);
  using Counts = std::vector<std::pair<std::string, std::uint32_t>>;
  CHECK(docs[0].counts == Counts{{"a", 2}, {"b", 1}});
  // Repeats are merged later, by Document.
  CHECK(docs[1].counts == Counts{{"b", 1}, {"c", 1}, {"c", 1}});
}

TEST_CASE("malformed lines name file and line") {
  std::istringstream bad_count("a:1\nb:x\n");
  try {
    parse_slice(bad_count, "s.bow");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.file() == "s.bow");
    CHECK(e.line() == 2);
  }
  std::istringstream zero("a:0\n");
  CHECK_THROWS_AS(parse_slice(zero, "z.bow"), ParseError);
  std::istringstream blank("a:1\n\nb:1\n");
  CHECK_THROWS_AS(parse_slice(blank, "b.bow"), ParseError);
}

TEST_CASE("ingest builds the sorted union vocabulary") {
  TempDir dir("ingest");
  dir.write("one.bow", "a a b\n");
  dir.write("two.bow", "c:2 b:1\n# note\na:1\n");
  dir.write("m.json", R"({"slices": [{"label": "1996", "file": "one.bow"}, {"label": "1997", "file": "two.bow"}]})");
  const TemporalCorpus c = ingest(dir / "m.json");
  CHECK(c.vocabulary().terms() == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(c.slice_count() == 2);
  const Document& first = c.slice(0).documents.at(0);
  CHECK(first.count(c.vocabulary().id("a")) == 2);
  CHECK(first.count(c.vocabulary().id("b")) == 1);
  CHECK(first.length() == 3);
  CHECK(c.slice(1).size() == 2);
  CHECK(c.token_count() == 3 + 3 + 1);
  CHECK(c.slice_count_sum(1)[2] == doctest::Approx(2.0));
}

TEST_CASE("ingest errors") {
  TempDir dir("ingest-err");
  dir.write("m.json", R"({"slices": [{"label": "x", "file": "missing.bow"}]})");
  CHECK_THROWS_AS(ingest(dir / "m.json"), InputError);
  CHECK_THROWS_AS(ingest(dir / "nope.json"), InputError);

  dir.write("s.bow", "a zebra\n");
  dir.write("vocab.txt", "a\nb\n");
  dir.write("v.json", R"({"slices": [{"label": "x", "file": "s.bow"}], "vocabulary": "vocab.txt"})");
  try {
    ingest(dir / "v.json");
    FAIL("expected unknown token error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("zebra") != std::string::npos);
  }

  dir.write("d.json", R"({"slices": [{"label": "x", "file": "s.bow"}, {"label": "x", "file": "s.bow"}]})");
  CHECK_THROWS_AS(ingest(dir / "d.json"), InputError);
}

TEST_CASE("empty slice is kept and flagged") {
  TempDir dir("empty");
  dir.write("a.bow", "a b\n");
  dir.write("e.bow", "");
  dir.write("m.json", R"({"slices": [{"label": "1", "file": "a.bow"}, {"label": "2", "file": "e.bow"}]})");
  std::vector<std::string> warnings;
  const TemporalCorpus c = ingest(dir / "m.json", {}, &warnings);
  CHECK(c.slice(1).size() == 0);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("'2'") != std::string::npos);
}

TEST_CASE("pre-supplied vocabulary fixes ids across corpora") {
  TempDir dir("vocab");
  dir.write("a.bow", "z y\n");
  dir.write("b.bow", "y\n");
  dir.write("vocab.txt", "z\ny\nx\n");
  dir.write("a.json", R"({"slices": [{"label": "1", "file": "a.bow"}]})");
  dir.write("b.json", R"({"slices": [{"label": "1", "file": "b.bow"}]})");
  IngestOptions opts;
  opts.vocabulary = dir / "vocab.txt";
  const auto a = ingest(dir / "a.json", opts);
  const auto b = ingest(dir / "b.json", opts);
  CHECK(a.vocabulary().hash() == b.vocabulary().hash());
  CHECK(a.vocabulary().id("y") == 1);
  CHECK(b.slice(0).documents[0].count(1) == 1);
}

TEST_CASE("write_corpus round-trips term for term") {
  TempDir dir("roundtrip");
  const auto c = fixtures::corpus_of(4, {{fixtures::doc({{0, 2}, {3, 1}}), fixtures::doc({{1, 5}})},
                                         {},
                                         {fixtures::doc({{2, 1}})}});
  write_corpus(c, dir / "out");
  const auto back = ingest(dir / "out" / "manifest.json");
  CHECK(back == c);
}

TEST_CASE("parallel ingest matches sequential") {
  TempDir dir("threads");
  std::string manifest = R"({"slices": [)";
  for (int t = 0; t < 6; ++t) {
    std::string body;
    for (int n = 0; n < 20; ++n) body += "t" + std::to_string((t * 7 + n) % 11) + ":" + std::to_string(n % 3 + 1) + " u\n";
    dir.write("s" + std::to_string(t) + ".bow", body);
    manifest += (t ? "," : "") + std::string(R"({"label": ")") + std::to_string(t) + R"(", "file": "s)" +
                std::to_string(t) + R"(.bow"})";
  }
  dir.write("m.json", manifest + "]}");
  IngestOptions four;
  four.threads = 4;
  CHECK(ingest(dir / "m.json") == ingest(dir / "m.json", four));
}

TEST_CASE("held-out split per slice") {
  // Reference per-year document counts. They sum to 5344, not the quoted total of 5469.
  const std::vector<std::size_t> sizes = {73,  97,  265, 119, 108, 91,  219, 141, 192, 162,
                                          382, 336, 329, 407, 395, 498, 367, 604, 559};
  CHECK(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) == 5344);
  std::vector<std::vector<Document>> slices;
  for (std::size_t n : sizes) slices.emplace_back(n, fixtures::doc({{0, 1}}));
  const auto corpus = fixtures::corpus_of(1, slices);
  CHECK(corpus.slice_count() == 19);
  CHECK(corpus.document_count() == 5344);

  const auto split = split_held_out(corpus, 10, 7);
  CHECK(split.held.document_count() == 190);
  CHECK(split.train.document_count() == 5344 - 190);

  const auto none = split_held_out(corpus, 0, 7);
  CHECK(none.held.document_count() == 0);
  CHECK(none.train == corpus);

  try {
    split_held_out(corpus, 80, 1);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("2000") != std::string::npos);
  }

  // 80/20: floor(0.2 N) per slice gives 1060; the reference count is 1067.
  const auto frac = split_fraction(corpus, 0.8, 3);
  CHECK(frac.held.document_count() == 1060);
  CHECK(std::abs(static_cast<double>(frac.held.document_count()) - 1067.0) / 1067.0 < 0.01);
}

TEST_CASE("splits partition each slice and are deterministic") {
  std::vector<Document> docs;
  for (TermId k = 0; k < 12; ++k) docs.push_back(fixtures::doc({{k, 1}}));
  const auto corpus = fixtures::corpus_of(12, {docs, docs});
  const auto a = split_held_out(corpus, 4, 11);
  const auto b = split_held_out(corpus, 4, 11);
  CHECK(a.held == b.held);
  CHECK(a.train == b.train);
  for (std::size_t t = 0; t < 2; ++t) {
    std::vector<Document> both = a.train.slice(t).documents;
    both.insert(both.end(), a.held.slice(t).documents.begin(), a.held.slice(t).documents.end());
    CHECK(both.size() == 12);
    for (const auto& d : docs) CHECK(std::count(both.begin(), both.end(), d) == 1);
  }
  const auto c = split_held_out(corpus, 4, 12);
  CHECK_FALSE(c.held == a.held);
}

TEST_CASE("fraction split rounding") {
  const auto two = fixtures::corpus_of(2, {{fixtures::doc({{0, 1}}), fixtures::doc({{1, 1}})}});
  const auto half = split_fraction(two, 0.5, 1);
  CHECK(half.train.document_count() == 1);
  CHECK(half.held.document_count() == 1);
  const auto one = fixtures::corpus_of(1, {{fixtures::doc({{0, 1}})}});
  const auto floor = split_fraction(one, 0.8, 1);
  CHECK(floor.train.document_count() == 1);
  CHECK(floor.held.document_count() == 0);
  CHECK_THROWS_AS(split_fraction(one, 1.0, 1), InputError);
  CHECK_THROWS_AS(split_fraction(one, 0.0, 1), InputError);
}

}
