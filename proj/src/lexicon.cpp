#include "headroom/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

#include "headroom/csv.hpp"
#include "headroom/error.hpp"
#include "headroom/text.hpp"

namespace headroom {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  if (line.find('\t') != std::string_view::npos) {
    std::size_t start = 0;
    while (start <= line.size()) {
      auto end = line.find('\t', start);
      if (end == std::string_view::npos) end = line.size();
      auto field = trim(line.substr(start, end - start));
      if (!field.empty()) fields.push_back(field);
      start = end + 1;
    }
  } else {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      auto start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i > start) fields.push_back(line.substr(start, i - start));
    }
  }
  return fields;
}

std::optional<int> parse_int(std::string_view text) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Empty when the pattern is well formed.
std::string pattern_problem(std::string_view pattern) {
  if (pattern.empty()) return "empty pattern";
  const auto star = pattern.find('*');
  if (star != std::string_view::npos && star != pattern.size() - 1)
    return "wildcard '*' allowed only in final position: " + std::string(pattern);
  if (pattern == "*") return "pattern '*' has an empty prefix";
  return {};
}

}  // namespace

Lexicon::Lexicon(std::vector<LexiconCategory> categories, std::vector<LexiconEntry> entries)
    : categories_(std::move(categories)) {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (!index_.emplace(categories_[i].id, i).second)
      throw DataError("duplicate lexicon category id " + std::to_string(categories_[i].id));
  }

  std::map<std::string, std::set<int>> merged;
  for (auto& entry : entries) {
    auto pattern = lowercase(entry.pattern);
    if (auto problem = pattern_problem(pattern); !problem.empty()) throw DataError(problem);
    if (entry.categories.empty()) throw DataError("entry '" + pattern + "' has no categories");
    for (int id : entry.categories)
      if (!index_.count(id))
        throw DataError("entry '" + pattern + "' references unknown category id " + std::to_string(id));
    merged[pattern].insert(entry.categories.begin(), entry.categories.end());
  }

  entries_.reserve(merged.size());
  for (auto& [pattern, cats] : merged) {
    LexiconEntry entry{pattern, cats};
    if (entry.wildcard()) {
      auto prefix = pattern.substr(0, pattern.size() - 1);
      max_prefix_ = std::max(max_prefix_, prefix.size());
      prefixes_.emplace(std::move(prefix), cats);
    } else {
      exact_.emplace(pattern, cats);
    }
    entries_.push_back(std::move(entry));
  }
}

std::set<int> Lexicon::match(std::string_view token) const {
  std::set<int> out;
  if (auto it = exact_.find(std::string(token)); it != exact_.end()) out = it->second;
  const auto longest = std::min(token.size(), max_prefix_);
  std::string prefix;
  prefix.reserve(longest);
  for (std::size_t len = 1; len <= longest; ++len) {
    prefix.push_back(token[len - 1]);
    if (auto it = prefixes_.find(prefix); it != prefixes_.end()) out.insert(it->second.begin(), it->second.end());
  }
  return out;
}

std::size_t Lexicon::index_of(int category_id) const {
  auto it = index_.find(category_id);
  if (it == index_.end()) throw DataError("unknown lexicon category id " + std::to_string(category_id));
  return it->second;
}

Lexicon parse_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open lexicon " + path.string());
  return parse_lexicon(in, path.string());
}

Lexicon parse_lexicon(std::istream& in, const std::string& source_name) {
  enum class Section { BeforeHeader, Header, Body } section = Section::BeforeHeader;
  std::vector<LexiconCategory> categories;
  std::set<int> known_ids;
  std::vector<LexiconEntry> entries;
  std::size_t skipped = 0;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw);
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line = trim(line.substr(3));
    if (line.empty()) continue;

    if (line == "%") {
      if (section == Section::Body) throw ParseError(source_name, line_no, "unexpected third '%' delimiter");
      section = section == Section::BeforeHeader ? Section::Header : Section::Body;
      continue;
    }
    if (section == Section::BeforeHeader) throw ParseError(source_name, line_no, "expected '%' header delimiter");

    if (section == Section::Header) {
      auto fields = split_fields(line);
      if (fields.size() != 2) throw ParseError(source_name, line_no, "category line must be 'id<TAB>name'");
      auto id = parse_int(fields[0]);
      if (!id) throw ParseError(source_name, line_no, "category id is not an integer");
      if (!known_ids.insert(*id).second)
        throw ParseError(source_name, line_no, "duplicate category id " + std::to_string(*id));
      categories.push_back({*id, std::string(fields[1])});
      continue;
    }

    // Tab-separated lines may carry multi-word patterns ("kind of").
    auto fields = split_fields(line);
    auto pattern = lowercase(fields.front());
    fields.erase(fields.begin());
    if (pattern.find(' ') != std::string::npos) {
      ++skipped;
      continue;
    }
    if (auto problem = pattern_problem(pattern); !problem.empty()) throw ParseError(source_name, line_no, problem);
    if (fields.empty()) throw ParseError(source_name, line_no, "entry '" + pattern + "' lists no categories");

    LexiconEntry entry{pattern, {}};
    for (auto field : fields) {
      auto id = parse_int(field);
      if (!id) throw ParseError(source_name, line_no, "category id '" + std::string(field) + "' is not an integer");
      if (!known_ids.count(*id))
        throw ParseError(source_name, line_no, "entry '" + pattern + "' references unknown category id " +
                                                   std::to_string(*id));
      entry.categories.insert(*id);
    }
    entries.push_back(std::move(entry));
  }
  if (section != Section::Body) throw ParseError(source_name, line_no, "missing '%' delimiter around the header");

  Lexicon lexicon(std::move(categories), std::move(entries));
  lexicon.skipped_multiword_ = skipped;
  return lexicon;
}

void write_lexicon(const Lexicon& lexicon, std::ostream& out) {
  out << "%\n";
  for (const auto& cat : lexicon.categories()) out << cat.id << '\t' << cat.name << '\n';
  out << "%\n";
  for (const auto& entry : lexicon.entries()) {
    out << entry.pattern;
    for (int id : entry.categories) out << '\t' << id;
    out << '\n';
  }
}

std::int64_t CategoryCounts::sum() const {
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  return total;
}

CategoryCounts& CategoryCounts::operator+=(const CategoryCounts& other) {
  if (names != other.names) throw DataError("cannot add category counts over different category sets");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  total_tokens += other.total_tokens;
  return *this;
}

CategoryCounts empty_counts(const Lexicon& lexicon) {
  CategoryCounts counts;
  for (const auto& cat : lexicon.categories()) counts.names.push_back(cat.name);
  counts.counts.assign(counts.names.size(), 0);
  return counts;
}

void count_text(const Lexicon& lexicon, std::string_view text, CategoryCounts& counts) {
  for (const auto& token : tokenize_words(text)) {
    ++counts.total_tokens;
    for (int id : lexicon.match(token)) ++counts.counts[lexicon.index_of(id)];
  }
}

CategoryCounts count_categories(const Lexicon& lexicon, const Corpus& corpus, unsigned threads) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(corpus.size())));
  std::vector<CategoryCounts> partial(threads, empty_counts(lexicon));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < corpus.size(); i += threads) count_text(lexicon, corpus[i].text, partial[t]);
      });
    }
  }
  auto total = empty_counts(lexicon);
  for (const auto& part : partial) total += part;
  return total;
}

void write_counts_csv(const CategoryCounts& counts, std::ostream& out) {
  out << "category,count\n";
  for (std::size_t i = 0; i < counts.names.size(); ++i)
    out << csv::escape(counts.names[i]) << ',' << counts.counts[i] << '\n';
  out << "__total_tokens__," << counts.total_tokens << '\n';
}

CategoryCounts read_counts_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open counts file " + path.string());
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || header->size() != 2) throw ParseError(path.string(), 1, "expected header 'category,count'");
  CategoryCounts counts;
  while (auto row = reader.next()) {
    if (row->size() != 2) throw ParseError(path.string(), reader.record_line(), "expected 2 fields");
    std::int64_t value = 0;
    const auto& text = (*row)[1];
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || value < 0)
      throw ParseError(path.string(), reader.record_line(), "count must be a non-negative integer");
    if ((*row)[0] == "__total_tokens__") {
      counts.total_tokens = value;
    } else {
      counts.names.push_back((*row)[0]);
      counts.counts.push_back(value);
    }
  }
  return counts;
}

}  // namespace headroom
