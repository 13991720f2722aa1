#include "headroom/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "headroom/csv.hpp"
#include "headroom/error.hpp"

namespace headroom {

namespace {

// Lowercase and drop everything but ASCII letters, so "African-American",
// "african american" and "AfricanAmerican" compare equal.
std::string squash(std::string_view text) {
  std::string out;
  for (unsigned char c : text)
    if (std::isalpha(c)) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

bool blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string_view to_string(Race race) {
  switch (race) {
    case Race::Asian: return "Asian";
    case Race::AfricanAmerican: return "African American";
    case Race::Hispanic: return "Hispanic";
    case Race::White: return "White";
    case Race::Other: return "Other";
  }
  return "Other";
}

std::string_view to_string(Gender gender) {
  switch (gender) {
    case Gender::Woman: return "woman";
    case Gender::Man: return "man";
    case Gender::Other: return "other";
  }
  return "other";
}

std::string_view to_string(Context context) {
  switch (context) {
    case Context::BlogPost: return "blog";
    case Context::RedditPost: return "reddit";
    case Context::TherapySession: return "therapy";
    case Context::Unspecified: return "unspecified";
  }
  return "unspecified";
}

std::string_view to_string(Phase phase) { return phase == Phase::PreCovid ? "pre" : "post"; }

std::string_view to_string(Source source) { return source == Source::Synthetic ? "synthetic" : "human"; }

Race parse_race(std::string_view text) {
  const auto key = squash(text);
  if (key == "asian") return Race::Asian;
  if (key == "africanamerican" || key == "black" || key == "blackorafricanamerican")
    return Race::AfricanAmerican;
  if (key == "hispanic" || key == "latinx" || key == "latino" || key == "latina" ||
      key == "hispanicorlatino")
    return Race::Hispanic;
  if (key == "white" || key == "caucasian") return Race::White;
  return Race::Other;
}

Gender parse_gender(std::string_view text) {
  const auto key = squash(text);
  if (key == "woman" || key == "women" || key == "female" || key == "f" || key == "w") return Gender::Woman;
  if (key == "man" || key == "men" || key == "male" || key == "m") return Gender::Man;
  return Gender::Other;
}

Context parse_context(std::string_view text) {
  const auto key = squash(text);
  if (key == "blog" || key == "blogpost") return Context::BlogPost;
  if (key == "reddit" || key == "redditpost") return Context::RedditPost;
  if (key == "therapy" || key == "therapysession" || key == "therapist") return Context::TherapySession;
  return Context::Unspecified;
}

Phase parse_phase(std::string_view text) {
  const auto key = squash(text);
  if (key == "pre" || key == "precovid" || key == "before" || key == "beforepandemic") return Phase::PreCovid;
  if (key == "post" || key == "postcovid" || key == "after" || key == "afterpandemic") return Phase::PostCovid;
  throw DataError("unrecognized phase '" + std::string(text) + "' (expected pre or post)");
}

Source parse_source(std::string_view text) {
  const auto key = squash(text);
  if (key.empty() || key == "synthetic") return Source::Synthetic;
  if (key == "human") return Source::Human;
  throw DataError("unrecognized source '" + std::string(text) + "' (expected synthetic or human)");
}

void DemographicProfile::validate() const {
  if (phase == Phase::PostCovid) {
    if (!year) throw DataError("post-COVID profile requires a year");
    if (*year != 2020 && *year != 2021)
      throw DataError("post-COVID year must be 2020 or 2021, got " + std::to_string(*year));
  } else if (year) {
    throw DataError("pre-COVID profile must not carry a year");
  }
}

Corpus::Corpus(std::vector<Document> documents, std::string provenance)
    : documents_(std::move(documents)), provenance_(std::move(provenance)) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(documents_.size());
  for (const auto& doc : documents_) {
    if (!seen.insert(doc.id).second) throw DataError("duplicate document id '" + doc.id + "'");
    if (blank(doc.text)) throw DataError("document '" + doc.id + "' has empty text");
    doc.profile.validate();
  }
}

CorpusFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? CorpusFormat::Csv : CorpusFormat::Jsonl;
}

namespace {

// Field values of one record, before validation. Missing fields are empty.
struct RawRecord {
  std::string id;
  std::optional<std::string> text;
  std::string race, gender, context, phase, source;
  std::optional<int> year;
};

Document make_document(const RawRecord& raw, const std::string& source_name, std::size_t line) {
  try {
    if (!raw.text || blank(*raw.text)) throw DataError("missing or empty text");
    Document doc;
    doc.id = raw.id.empty() ? "doc-" + std::to_string(line) : raw.id;
    doc.text = *raw.text;
    doc.profile.race = parse_race(raw.race);
    doc.profile.gender = parse_gender(raw.gender);
    doc.profile.context = parse_context(raw.context);
    if (raw.phase.empty())
      doc.profile.phase = raw.year ? Phase::PostCovid : Phase::PreCovid;
    else
      doc.profile.phase = parse_phase(raw.phase);
    doc.profile.year = raw.year;
    doc.profile.validate();
    doc.source = parse_source(raw.source);
    return doc;
  } catch (const ParseError&) {
    throw;
  } catch (const DataError& e) {
    throw ParseError(source_name, line, e.what());
  }
}

std::string string_field(const nlohmann::json& obj, const char* key, const std::string& source_name,
                         std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw ParseError(source_name, line, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<RawRecord> read_jsonl(std::istream& in, const std::string& source_name,
                                  std::vector<std::size_t>& lines) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source_name, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(source_name, line_no, "record is not a JSON object");

    RawRecord raw;
    raw.id = string_field(obj, "id", source_name, line_no);
    if (auto it = obj.find("text"); it != obj.end() && it->is_string()) raw.text = it->get<std::string>();
    raw.race = string_field(obj, "race", source_name, line_no);
    raw.gender = string_field(obj, "gender", source_name, line_no);
    raw.context = string_field(obj, "context", source_name, line_no);
    raw.phase = string_field(obj, "phase", source_name, line_no);
    raw.source = string_field(obj, "source", source_name, line_no);
    if (auto it = obj.find("year"); it != obj.end() && !it->is_null()) {
      if (!it->is_number_integer()) throw ParseError(source_name, line_no, "field 'year' must be an integer");
      raw.year = it->get<int>();
    }
    records.push_back(std::move(raw));
    lines.push_back(line_no);
  }
  return records;
}

std::vector<RawRecord> read_csv(std::istream& in, const std::string& source_name,
                                std::vector<std::size_t>& lines) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) return {};
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header->size(); ++i) column[squash((*header)[i])] = i;
  if (!column.count("text")) throw ParseError(source_name, reader.record_line(), "CSV header lacks a 'text' column");

  std::vector<RawRecord> records;
  while (auto row = reader.next()) {
    const auto line_no = reader.record_line();
    if (row->size() != header->size())
      throw ParseError(source_name, line_no,
                       "expected " + std::to_string(header->size()) + " fields, got " + std::to_string(row->size()));
    auto get = [&](const char* name) -> std::string {
      auto it = column.find(name);
      return it == column.end() ? std::string{} : (*row)[it->second];
    };
    RawRecord raw;
    raw.id = get("id");
    raw.text = get("text");
    raw.race = get("race");
    raw.gender = get("gender");
    raw.context = get("context");
    raw.phase = get("phase");
    raw.source = get("source");
    if (auto year = get("year"); !blank(year)) {
      try {
        std::size_t pos = 0;
        raw.year = std::stoi(year, &pos);
        if (pos != year.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ParseError(source_name, line_no, "field 'year' must be an integer");
      }
    }
    records.push_back(std::move(raw));
    lines.push_back(line_no);
  }
  return records;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  const auto source_name = path.string();

  std::vector<std::size_t> lines;
  auto records = format == CorpusFormat::Csv ? read_csv(in, source_name, lines)
                                             : read_jsonl(in, source_name, lines);
  if (in.bad()) throw IoError("error reading " + source_name);

  std::vector<Document> docs;
  docs.reserve(records.size());
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto doc = make_document(records[i], source_name, lines[i]);
    if (!seen.insert(doc.id).second)
      throw ParseError(source_name, lines[i], "duplicate document id '" + doc.id + "'");
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs), source_name);
}

std::string document_to_jsonl(const Document& doc) {
  nlohmann::ordered_json obj;
  obj["id"] = doc.id;
  obj["text"] = doc.text;
  obj["race"] = to_string(doc.profile.race);
  obj["gender"] = to_string(doc.profile.gender);
  obj["context"] = to_string(doc.profile.context);
  obj["phase"] = to_string(doc.profile.phase);
  if (doc.profile.year) obj["year"] = *doc.profile.year;
  obj["source"] = to_string(doc.source);
  try {
    return obj.dump();
  } catch (const nlohmann::json::type_error& e) {
    throw DataError("document '" + doc.id + "' is not valid UTF-8: " + e.what());
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write corpus file " + path.string());
  if (format == CorpusFormat::Jsonl) {
    for (const auto& doc : corpus) out << document_to_jsonl(doc) << '\n';
  } else {
    out << "id,text,race,gender,context,phase,year,source\n";
    for (const auto& doc : corpus) {
      const auto& p = doc.profile;
      out << csv::join_row({doc.id, doc.text, std::string(to_string(p.race)), std::string(to_string(p.gender)),
                            std::string(to_string(p.context)), std::string(to_string(p.phase)),
                            p.year ? std::to_string(*p.year) : std::string{}, std::string(to_string(doc.source))})
          << '\n';
    }
  }
  if (!out) throw IoError("error writing " + path.string());
}

Corpus filter_corpus(const Corpus& corpus, const ProfilePredicate& predicate) {
  std::vector<Document> kept;
  for (const auto& doc : corpus)
    if (predicate(doc.profile)) kept.push_back(doc);
  return Corpus(std::move(kept), corpus.provenance());
}

ProfileFilter ProfileFilter::parse(std::string_view expression) {
  ProfileFilter filter;
  std::size_t start = 0;
  while (start <= expression.size()) {
    auto end = expression.find_first_of(",&", start);
    if (end == std::string_view::npos) end = expression.size();
    auto clause = expression.substr(start, end - start);
    start = end + 1;
    if (blank(clause)) continue;

    auto eq = clause.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("filter clause '" + std::string(clause) + "' is not of the form field=value");
    const auto key = squash(clause.substr(0, eq));
    const auto value = clause.substr(eq + 1);
    const auto squashed = squash(value);
    if (key == "race") {
      filter.race_ = parse_race(value);
      if (filter.race_ == Race::Other && squashed != "other")
        throw ConfigError("unknown race '" + std::string(value) + "' in filter");
    } else if (key == "gender") {
      filter.gender_ = parse_gender(value);
      if (filter.gender_ == Gender::Other && squashed != "other")
        throw ConfigError("unknown gender '" + std::string(value) + "' in filter");
    } else if (key == "context") {
      filter.context_ = parse_context(value);
      if (filter.context_ == Context::Unspecified && squashed != "unspecified")
        throw ConfigError("unknown context '" + std::string(value) + "' in filter");
    } else if (key == "phase") {
      try {
        filter.phase_ = parse_phase(value);
      } catch (const DataError& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "year") {
      try {
        filter.year_ = std::stoi(std::string(value));
      } catch (const std::exception&) {
        throw ConfigError("year filter needs an integer, got '" + std::string(value) + "'");
      }
    } else {
      throw ConfigError("unknown filter field '" + std::string(clause.substr(0, eq)) + "'");
    }
    if (end == expression.size()) break;
  }
  return filter;
}

bool ProfileFilter::operator()(const DemographicProfile& profile) const {
  if (race_ && profile.race != *race_) return false;
  if (gender_ && profile.gender != *gender_) return false;
  if (context_ && profile.context != *context_) return false;
  if (phase_ && profile.phase != *phase_) return false;
  if (year_ && profile.year != *year_) return false;
  return true;
}

std::string ProfileFilter::label() const {
  std::vector<std::string> parts;
  auto slug = [](std::string_view text) {
    std::string out;
    for (unsigned char c : text) out.push_back(c == ' ' ? '-' : static_cast<char>(std::tolower(c)));
    return out;
  };
  if (race_) parts.push_back("race=" + slug(to_string(*race_)));
  if (gender_) parts.push_back("gender=" + slug(to_string(*gender_)));
  if (context_) parts.push_back("context=" + slug(to_string(*context_)));
  if (phase_) parts.push_back("phase=" + slug(to_string(*phase_)));
  if (year_) parts.push_back("year=" + std::to_string(*year_));
  if (parts.empty()) return "all";
  std::string out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out += "," + parts[i];
  return out;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  for (auto r : kAllRaces) stats.race[r] = 0;
  for (auto g : kAllGenders) stats.gender[g] = 0;
  for (auto c : kAllContexts) stats.context[c] = 0;
  for (auto p : kAllPhases) stats.phase[p] = 0;
  for (const auto& doc : corpus) {
    const auto& p = doc.profile;
    ++stats.total;
    ++stats.race[p.race];
    ++stats.gender[p.gender];
    ++stats.context[p.context];
    ++stats.phase[p.phase];
    ++stats.cells[{p.race, p.gender, p.context, p.phase}];
  }
  return stats;
}

}  // namespace headroom
