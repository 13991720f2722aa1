#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace headroom {

enum class Race { Asian, AfricanAmerican, Hispanic, White, Other };
enum class Gender { Woman, Man, Other };
enum class Context { BlogPost, RedditPost, TherapySession, Unspecified };
enum class Phase { PreCovid, PostCovid };
enum class Source { Synthetic, Human };

inline constexpr Race kAllRaces[] = {Race::Asian, Race::AfricanAmerican, Race::Hispanic,
                                     Race::White, Race::Other};
inline constexpr Gender kAllGenders[] = {Gender::Woman, Gender::Man, Gender::Other};
inline constexpr Context kAllContexts[] = {Context::BlogPost, Context::RedditPost,
                                           Context::TherapySession, Context::Unspecified};
inline constexpr Phase kAllPhases[] = {Phase::PreCovid, Phase::PostCovid};

// Canonical serialized names. Race names are the display form used in prompts.
std::string_view to_string(Race race);
std::string_view to_string(Gender gender);
std::string_view to_string(Context context);
std::string_view to_string(Phase phase);
std::string_view to_string(Source source);

// Lenient parsers used on load. Aliases ("Latinx", "Black", "female", ...)
// collapse onto the canonical enum; empty or unrecognized values map to
// Other / Unspecified.
Race parse_race(std::string_view text);
Gender parse_gender(std::string_view text);
Context parse_context(std::string_view text);
// Strict: accepts "pre"/"post" (and a few spelled-out forms), throws otherwise.
Phase parse_phase(std::string_view text);
Source parse_source(std::string_view text);

struct DemographicProfile {
  Race race = Race::Other;
  Gender gender = Gender::Other;
  Context context = Context::Unspecified;
  Phase phase = Phase::PreCovid;
  std::optional<int> year;  // present iff phase == PostCovid

  // Throws DataError when the year/phase invariant is broken.
  void validate() const;

  friend bool operator==(const DemographicProfile&, const DemographicProfile&) = default;
};

struct Document {
  std::string id;
  std::string text;
  DemographicProfile profile;
  Source source = Source::Synthetic;

  friend bool operator==(const Document&, const Document&) = default;
};

using ProfilePredicate = std::function<bool(const DemographicProfile&)>;

// Ordered, immutable-after-construction collection of documents with unique ids.
class Corpus {
 public:
  Corpus() = default;
  // Throws DataError on duplicate ids or empty texts.
  explicit Corpus(std::vector<Document> documents, std::string provenance = {});

  const std::vector<Document>& documents() const { return documents_; }
  const std::string& provenance() const { return provenance_; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }

  auto begin() const { return documents_.begin(); }
  auto end() const { return documents_.end(); }
  const Document& operator[](std::size_t i) const { return documents_[i]; }

 private:
  std::vector<Document> documents_;
  std::string provenance_;
};

enum class CorpusFormat { Jsonl, Csv };

// Picks the format from the file extension (.csv -> Csv, anything else -> Jsonl).
CorpusFormat format_from_path(const std::filesystem::path& path);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
inline Corpus load_corpus(const std::filesystem::path& path) {
  return load_corpus(path, format_from_path(path));
}
void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format);

std::string document_to_jsonl(const Document& doc);

Corpus filter_corpus(const Corpus& corpus, const ProfilePredicate& predicate);

// Conjunction of field=value clauses, e.g. "race=asian,gender=woman".
// The empty expression matches everything.
class ProfileFilter {
 public:
  static ProfileFilter parse(std::string_view expression);

  bool operator()(const DemographicProfile& profile) const;
  // Canonical rendering of the expression; stable across runs.
  std::string label() const;

 private:
  std::optional<Race> race_;
  std::optional<Gender> gender_;
  std::optional<Context> context_;
  std::optional<Phase> phase_;
  std::optional<int> year_;
};

struct CorpusStats {
  std::size_t total = 0;
  std::map<Race, std::size_t> race;
  std::map<Gender, std::size_t> gender;
  std::map<Context, std::size_t> context;
  std::map<Phase, std::size_t> phase;
  // (race, gender, context, phase) -> count, only non-empty cells.
  std::map<std::tuple<Race, Gender, Context, Phase>, std::size_t> cells;
};

CorpusStats corpus_stats(const Corpus& corpus);

}  // namespace headroom
