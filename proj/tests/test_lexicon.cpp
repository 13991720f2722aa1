#include <doctest.h>

#include <random>
#include <sstream>

#include "headroom/error.hpp"
#include "headroom/lexicon.hpp"
#include "test_util.hpp"

using namespace headroom;

namespace {

const std::string kFixture = std::string(HEADROOM_DATA_DIR) + "/lexicon/fixture.dic";

std::set<std::string> names(const Lexicon& lex, const std::set<int>& ids) {
  std::set<std::string> out;
  for (int id : ids) out.insert(lex.name_of(id));
  return out;
}

Lexicon parse(const std::string& text) {
  std::istringstream in(text);
  return parse_lexicon(in, "inline");
}

Corpus random_corpus(std::mt19937_64& rng, std::size_t docs) {
  static const std::vector<std::string> words = {"father", "mother", "work",  "worried", "money", "friends", "sad",
                                                 "the",    "and",    "happy", "house",   "i",     "we",      "talking",
                                                 "bills",  "stress", "fear",  "music",   "zebra", "he",      "she"};
  std::vector<Document> out;
  for (std::size_t d = 0; d < docs; ++d) {
    Document doc;
    doc.id = "d" + std::to_string(d);
    const auto len = 1 + rng() % 40;
    for (std::size_t w = 0; w < len; ++w) doc.text += words[rng() % words.size()] + (w % 5 == 4 ? ". " : " ");
    out.push_back(std::move(doc));
  }
  return Corpus(std::move(out));
}

}  // namespace

TEST_CASE("father maps to male, family and social") {
  const auto lex = parse_lexicon(kFixture);
  CHECK(names(lex, lex.match("father")) == std::set<std::string>{"male", "family", "social"});
  CHECK(names(lex, lex.match("friends")) == std::set<std::string>{"friend", "social"});
  CHECK(names(lex, lex.match("worried")) == std::set<std::string>{"negemo", "anx"});
  CHECK(lex.match("zebra").empty());
  // Exact patterns do not prefix-match.
  CHECK(lex.match("fathers").empty());
}

TEST_CASE("wildcards match by prefix and unions accumulate") {
  auto lex = parse("%\n1\ta\n2\tb\n%\nwork*\t1\nworker\t2\nwo*\t2\n");
  CHECK(lex.match("work") == std::set<int>{1, 2});
  CHECK(lex.match("worker") == std::set<int>{1, 2});
  CHECK(lex.match("wolf") == std::set<int>{2});
  CHECK(lex.match("w").empty());
}

TEST_CASE("parser errors carry line numbers") {
  auto expect_line = [](const std::string& text, std::size_t line) {
    try {
      parse(text);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
    }
  };
  expect_line("1\tsocial\n", 1);
  expect_line("%\n1\tsocial\n%\nfriend\t9\n", 4);
  expect_line("%\n1\tsocial\n%\nfr*end\t1\n", 4);
  expect_line("%\nx\tsocial\n%\n", 2);
  expect_line("%\n1\tsocial\n%\nfriend\tone\n", 4);
}

TEST_CASE("multi-word patterns are skipped and counted") {
  auto lex = parse("\xEF\xBB\xBF%\n1\ta\n%\nkind of\t1\nkind\t1\n");
  CHECK(lex.skipped_multiword() == 1);
  CHECK(lex.entries().size() == 1);
}

TEST_CASE("duplicate patterns merge their categories") {
  auto lex = parse("%\n1\ta\n2\tb\n%\nsun\t1\nsun\t2\n");
  REQUIRE(lex.entries().size() == 1);
  CHECK(lex.entries()[0].categories == std::set<int>{1, 2});
}

TEST_CASE("write and parse round-trip") {
  const auto lex = parse_lexicon(kFixture);
  std::ostringstream out;
  write_lexicon(lex, out);
  const auto back = parse(out.str());
  CHECK(back.entries() == lex.entries());
  REQUIRE(back.categories().size() == lex.categories().size());
  for (std::size_t i = 0; i < lex.categories().size(); ++i) {
    CHECK(back.categories()[i].id == lex.categories()[i].id);
    CHECK(back.categories()[i].name == lex.categories()[i].name);
  }
}

TEST_CASE("counting is per token incidence") {
  const auto lex = parse_lexicon(kFixture);
  auto counts = empty_counts(lex);
  count_text(lex, "My father and my father's friend.", counts);
  auto at = [&](const std::string& name) {
    for (std::size_t i = 0; i < counts.names.size(); ++i)
      if (counts.names[i] == name) return counts.counts[i];
    FAIL("unknown category " << name);
    return std::int64_t{-1};
  };
  CHECK(counts.total_tokens == 6);
  CHECK(at("male") == 1);  // "father's" is a separate token
  CHECK(at("i") == 2);
  CHECK(at("social") == 2);
  CHECK(at("friend") == 1);
}

TEST_CASE("counts are additive over random corpus splits") {
  const auto lex = parse_lexicon(kFixture);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto corpus = random_corpus(rng, 60);
    const auto whole = count_categories(lex, corpus);
    std::vector<Document> left, right;
    for (const auto& d : corpus) (rng() % 2 ? left : right).push_back(d);
    auto parts = count_categories(lex, Corpus(left));
    parts += count_categories(lex, Corpus(right));
    CHECK(parts == whole);
    CHECK(count_categories(lex, corpus, 4) == whole);
  }
}

TEST_CASE("adding a document never lowers a count") {
  const auto lex = parse_lexicon(kFixture);
  std::mt19937_64 rng(5);
  const auto corpus = random_corpus(rng, 30);
  std::vector<Document> docs;
  auto previous = empty_counts(lex);
  for (const auto& d : corpus) {
    docs.push_back(d);
    const auto now = count_categories(lex, Corpus(docs));
    for (std::size_t i = 0; i < now.counts.size(); ++i) CHECK(now.counts[i] >= previous.counts[i]);
    previous = now;
  }
}

TEST_CASE("counts csv round-trip") {
  headroom::testing::TempDir dir;
  const auto lex = parse_lexicon(kFixture);
  auto counts = empty_counts(lex);
  count_text(lex, "we worried about money and bills at home", counts);
  std::ostringstream out;
  write_counts_csv(counts, out);
  headroom::testing::write_text(dir / "c.csv", out.str());
  CHECK(read_counts_csv(dir / "c.csv") == counts);
}
