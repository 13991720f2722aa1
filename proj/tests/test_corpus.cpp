#include <doctest.h>

#include "headroom/corpus.hpp"
#include "headroom/error.hpp"
#include "test_util.hpp"

using namespace headroom;
using headroom::testing::TempDir;
using headroom::testing::write_text;

namespace {

Document doc(std::string id, Race race, Gender gender, Context context, Phase phase, std::optional<int> year = {}) {
  Document d;
  d.id = std::move(id);
  d.text = "some text for " + d.id;
  d.profile = {race, gender, context, phase, year};
  return d;
}

Corpus sample() {
  return Corpus({doc("a", Race::Asian, Gender::Woman, Context::BlogPost, Phase::PreCovid),
                 doc("b", Race::Asian, Gender::Man, Context::RedditPost, Phase::PostCovid, 2020),
                 doc("c", Race::White, Gender::Woman, Context::TherapySession, Phase::PostCovid, 2021),
                 doc("d", Race::Hispanic, Gender::Woman, Context::BlogPost, Phase::PreCovid)});
}

}  // namespace

TEST_CASE("demographic aliases collapse to canonical values") {
  CHECK(parse_race("Latinx") == Race::Hispanic);
  CHECK(parse_race("latina") == Race::Hispanic);
  CHECK(parse_race("Black") == Race::AfricanAmerican);
  CHECK(parse_race("African-American") == Race::AfricanAmerican);
  CHECK(parse_race("african american") == Race::AfricanAmerican);
  CHECK(parse_race("martian") == Race::Other);
  CHECK(parse_race("") == Race::Other);
  CHECK(parse_gender("Female") == Gender::Woman);
  CHECK(parse_gender("M") == Gender::Man);
  CHECK(parse_gender("nonbinary") == Gender::Other);
  CHECK(parse_context("Reddit") == Context::RedditPost);
  CHECK(parse_context("therapy session") == Context::TherapySession);
  CHECK(parse_context("???") == Context::Unspecified);
  CHECK(parse_phase("post") == Phase::PostCovid);
  CHECK_THROWS_AS(parse_phase("later"), DataError);
}

TEST_CASE("canonical names round-trip through the parsers") {
  for (auto r : kAllRaces) CHECK(parse_race(to_string(r)) == r);
  for (auto g : kAllGenders) CHECK(parse_gender(to_string(g)) == g);
  for (auto c : kAllContexts) CHECK(parse_context(to_string(c)) == c);
  for (auto p : kAllPhases) CHECK(parse_phase(to_string(p)) == p);
}

TEST_CASE("profile year must agree with phase") {
  DemographicProfile p{Race::Asian, Gender::Woman, Context::BlogPost, Phase::PostCovid, std::nullopt};
  CHECK_THROWS_AS(p.validate(), DataError);
  p.year = 2019;
  CHECK_THROWS_AS(p.validate(), DataError);
  p.year = 2021;
  CHECK_NOTHROW(p.validate());
  p.phase = Phase::PreCovid;
  CHECK_THROWS_AS(p.validate(), DataError);
}

TEST_CASE("corpus rejects duplicate ids and blank texts") {
  auto a = doc("x", Race::Asian, Gender::Woman, Context::BlogPost, Phase::PreCovid);
  CHECK_THROWS_AS(Corpus({a, a}), DataError);
  a.text = "   ";
  CHECK_THROWS_AS(Corpus({a}), DataError);
}

TEST_CASE("jsonl and csv round-trip") {
  TempDir dir;
  auto corpus = sample();
  for (auto format : {CorpusFormat::Jsonl, CorpusFormat::Csv}) {
    auto path = dir / (format == CorpusFormat::Jsonl ? "c.jsonl" : "c.csv");
    save_corpus(corpus, path, format);
    auto back = load_corpus(path);
    CHECK(back.documents() == corpus.documents());
  }
}

TEST_CASE("csv fields may contain quotes, commas and newlines") {
  TempDir dir;
  auto d = doc("q", Race::White, Gender::Man, Context::BlogPost, Phase::PreCovid);
  d.text = "line one, \"quoted\"\nline two";
  Corpus corpus({d});
  save_corpus(corpus, dir / "q.csv", CorpusFormat::Csv);
  CHECK(load_corpus(dir / "q.csv").documents() == corpus.documents());
}

TEST_CASE("loader normalizes aliases and reports bad lines") {
  TempDir dir;
  write_text(dir / "ok.jsonl",
             "{\"id\":\"1\",\"text\":\"hi there\",\"race\":\"Latinx\",\"gender\":\"female\",\"context\":\"reddit\","
             "\"phase\":\"post\",\"year\":2020}\n\n");
  auto c = load_corpus(dir / "ok.jsonl");
  REQUIRE(c.size() == 1);
  CHECK(c[0].profile.race == Race::Hispanic);
  CHECK(c[0].profile.gender == Gender::Woman);

  write_text(dir / "bad.jsonl",
             "{\"id\":\"1\",\"text\":\"a\",\"race\":\"asian\",\"gender\":\"man\",\"phase\":\"pre\"}\n{not json\n");
  try {
    load_corpus(dir / "bad.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("profile filters compose as a conjunction") {
  auto corpus = sample();
  auto women = ProfileFilter::parse("gender=woman");
  auto asian_women = ProfileFilter::parse("race=asian,gender=woman");
  CHECK(filter_corpus(corpus, women).size() == 3);
  CHECK(filter_corpus(corpus, asian_women).size() == 1);
  CHECK(filter_corpus(corpus, ProfileFilter::parse("")).size() == 4);
  CHECK(filter_corpus(corpus, ProfileFilter::parse("phase=post&year=2021")).size() == 1);
  CHECK(asian_women.label() == "race=asian,gender=woman");
  CHECK(ProfileFilter::parse("gender=Female , race=Black").label() == "race=african-american,gender=woman");
  CHECK(ProfileFilter::parse("").label() == "all");
  CHECK_THROWS_AS(ProfileFilter::parse("race=martian"), ConfigError);
  CHECK_THROWS_AS(ProfileFilter::parse("colour=blue"), ConfigError);
}

TEST_CASE("stats margins cover every enum value") {
  auto stats = corpus_stats(sample());
  CHECK(stats.total == 4);
  CHECK(stats.race.at(Race::Asian) == 2);
  CHECK(stats.race.at(Race::AfricanAmerican) == 0);
  CHECK(stats.gender.at(Gender::Woman) == 3);
  CHECK(stats.phase.at(Phase::PostCovid) == 2);
  CHECK(stats.cells.size() == 4);
}
