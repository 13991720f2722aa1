#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "headroom/corpus.hpp"

namespace headroom {

struct LexiconCategory {
  int id = 0;
  std::string name;
};

struct LexiconEntry {
  std::string pattern;  // lowercase; a trailing '*' makes it a prefix pattern
  std::set<int> categories;

  bool wildcard() const { return !pattern.empty() && pattern.back() == '*'; }
  friend bool operator==(const LexiconEntry&, const LexiconEntry&) = default;
};

// LIWC-style dictionary. Immutable once built.
class Lexicon {
 public:
  Lexicon() = default;
  // Validates the entries (known category ids, wildcard placement) and
  // merges duplicate patterns.
  Lexicon(std::vector<LexiconCategory> categories, std::vector<LexiconEntry> entries);

  const std::vector<LexiconCategory>& categories() const { return categories_; }
  // Sorted by pattern.
  const std::vector<LexiconEntry>& entries() const { return entries_; }
  std::size_t skipped_multiword() const { return skipped_multiword_; }

  // Union of the categories of every matching entry. Exact patterns match
  // the whole token; wildcard patterns match by prefix.
  std::set<int> match(std::string_view token) const;

  // Position of a category id in categories(); throws on unknown ids.
  std::size_t index_of(int category_id) const;
  const std::string& name_of(int category_id) const { return categories_[index_of(category_id)].name; }

 private:
  friend Lexicon parse_lexicon(std::istream& in, const std::string& source_name);

  std::vector<LexiconCategory> categories_;
  std::vector<LexiconEntry> entries_;
  std::unordered_map<std::string, std::set<int>> exact_;
  std::unordered_map<std::string, std::set<int>> prefixes_;  // pattern without '*'
  std::size_t max_prefix_ = 0;
  std::map<int, std::size_t> index_;
  std::size_t skipped_multiword_ = 0;
};

// .dic format: a '%' line, "id<TAB>name" lines, a '%' line, then
// "pattern<TAB>id<TAB>id..." lines. Multi-word patterns are skipped and
// counted.
Lexicon parse_lexicon(const std::filesystem::path& path);
Lexicon parse_lexicon(std::istream& in, const std::string& source_name = "<lexicon>");

void write_lexicon(const Lexicon& lexicon, std::ostream& out);

// Per-category tallies aligned to the lexicon's category order.
struct CategoryCounts {
  std::vector<std::string> names;
  std::vector<std::int64_t> counts;
  std::int64_t total_tokens = 0;

  std::int64_t sum() const;
  CategoryCounts& operator+=(const CategoryCounts& other);
  friend bool operator==(const CategoryCounts&, const CategoryCounts&) = default;
};

CategoryCounts empty_counts(const Lexicon& lexicon);

// Adds the category incidences of one text to counts.
void count_text(const Lexicon& lexicon, std::string_view text, CategoryCounts& counts);

// Every token contributes one incidence to each category it matches.
// Documents are processed in parallel when threads > 1.
CategoryCounts count_categories(const Lexicon& lexicon, const Corpus& corpus, unsigned threads = 1);

// CSV "category,count" with a trailing "__total_tokens__" row.
void write_counts_csv(const CategoryCounts& counts, std::ostream& out);
CategoryCounts read_counts_csv(const std::filesystem::path& path);

}  // namespace headroom
