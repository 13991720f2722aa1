#include "headroom/semsim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <unordered_set>

#include "headroom/csv.hpp"
#include "headroom/error.hpp"
#include "headroom/text.hpp"

namespace headroom {

std::optional<std::size_t> EmbeddingTable::find(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool EmbeddingTable::add(std::string word, std::span<const float> values) {
  if (values.size() != dimension_) throw DataError("embedding row has wrong dimension");
  if (!index_.emplace(word, words_.size()).second) return false;
  words_.push_back(std::move(word));
  values_.insert(values_.end(), values.begin(), values.end());
  return true;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dimension) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings file " + path.string());
  return load_embeddings(in, dimension, path.string());
}

EmbeddingTable load_embeddings(std::istream& in, std::size_t dimension, const std::string& source_name) {
  if (dimension == 0) throw ConfigError("embedding dimension must be positive");
  EmbeddingTable table(dimension);
  std::vector<float> values;
  values.reserve(dimension);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0) {
      if (!line.empty()) ++table.rejected_rows;
      continue;
    }
    values.clear();
    const char* p = line.data() + space;
    const char* end = line.data() + line.size();
    bool ok = true;
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      float v = 0.0F;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{} || (next < end && *next != ' ')) {
        ok = false;
        break;
      }
      values.push_back(v);
      p = next;
    }
    if (!ok || values.size() != dimension) {
      ++table.rejected_rows;
      continue;
    }
    std::string word = line.substr(0, space);
    std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) { return std::tolower(c); });
    table.add(std::move(word), values);
  }
  if (in.bad()) throw IoError("error reading " + source_name);
  if (table.size() == 0) throw DataError("no valid embedding rows of dimension " + std::to_string(dimension) +
                                         " in " + source_name);
  return table;
}

OovPolicy parse_oov_policy(const std::string& text) {
  if (text == "skip") return OovPolicy::Skip;
  if (text == "backoff" || text == "backoff-unstem") return OovPolicy::BackoffUnstem;
  if (text == "error") return OovPolicy::Error;
  throw ConfigError("unknown OOV policy '" + text + "' (skip, backoff-unstem, error)");
}

SurfaceForms SurfaceForms::from_corpus(const Corpus& corpus) {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  for (const auto& doc : corpus) {
    auto stream = tokenize(doc.text);
    for (std::size_t i = 0; i < stream.size(); ++i) ++counts[stream.stems[i]][stream.tokens[i]];
  }
  SurfaceForms forms;
  for (const auto& [stem, tokens] : counts) {
    // Highest count; ties go to the lexicographically smallest token.
    const auto best = std::max_element(tokens.begin(), tokens.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
    forms.best_.emplace(stem, best->first);
  }
  return forms;
}

std::optional<std::string> SurfaceForms::lookup(const std::string& stem) const {
  auto it = best_.find(stem);
  if (it == best_.end()) return std::nullopt;
  return it->second;
}

SetVector set_vector(const EmbeddingTable& table, const std::vector<std::string>& keywords, OovPolicy policy,
                     const SurfaceForms* surface) {
  if (keywords.empty()) throw DataError("keyword set is empty");
  SetVector out;
  out.vector.assign(table.dimension(), 0.0);
  std::unordered_set<std::string> seen;
  std::unordered_set<std::size_t> used_rows;
  for (const auto& keyword : keywords) {
    if (!seen.insert(keyword).second) continue;
    auto row = table.find(keyword);
    if (!row && policy == OovPolicy::BackoffUnstem && surface)
      if (auto form = surface->lookup(keyword)) row = table.find(*form);
    if (!row) {
      if (policy == OovPolicy::Error) throw DataError("keyword '" + keyword + "' is not in the embedding table");
      out.oov.push_back(keyword);
      continue;
    }
    used_rows.insert(*row);  // a backed-off stem may land on a word already in the set
  }
  if (used_rows.empty()) throw DataError("every keyword in the set is out of vocabulary");
  // Sum in table order so the mean does not depend on keyword order.
  std::vector<std::size_t> rows(used_rows.begin(), used_rows.end());
  std::sort(rows.begin(), rows.end());
  for (auto r : rows) {
    const auto v = table.vector(r);
    for (std::size_t i = 0; i < v.size(); ++i) out.vector[i] += v[i];
  }
  out.used = rows.size();
  for (auto& x : out.vector) x /= static_cast<double>(out.used);
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("cosine of vectors with different dimensions");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DataError("cosine of a zero-norm vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double topic_similarity(const EmbeddingTable& table, const std::vector<std::string>& keywords_a,
                        const std::vector<std::string>& keywords_b, OovPolicy policy, const SurfaceForms* surface) {
  const auto a = set_vector(table, keywords_a, policy, surface);
  const auto b = set_vector(table, keywords_b, policy, surface);
  return cosine(a.vector, b.vector);
}

Baseline random_baseline(const EmbeddingTable& table, const BaselineOptions& options) {
  if (options.trials < 100) throw ConfigError("random baseline needs at least 100 trials");
  if (options.set_size < 1) throw ConfigError("random baseline set size must be at least 1");
  const std::size_t skip = std::min(options.exclude_top, table.size());
  const std::size_t eligible = table.size() - skip;
  if (eligible < 2 * options.set_size)
    throw DataError("embedding vocabulary (" + std::to_string(eligible) + " eligible words) is smaller than twice the set size");

  std::mt19937_64 rng(options.seed * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
  const std::size_t dim = table.dimension();
  std::vector<double> sa(dim), sb(dim);
  std::vector<double> values;
  values.reserve(options.trials);
  std::unordered_set<std::size_t> drawn;
  std::vector<std::size_t> picks;

  for (std::size_t t = 0; t < options.trials; ++t) {
    drawn.clear();
    picks.clear();
    while (picks.size() < 2 * options.set_size) {
      const auto idx = skip + static_cast<std::size_t>(rng() % eligible);
      if (drawn.insert(idx).second) picks.push_back(idx);
    }
    std::fill(sa.begin(), sa.end(), 0.0);
    std::fill(sb.begin(), sb.end(), 0.0);
    for (std::size_t i = 0; i < picks.size(); ++i) {
      auto& target = i < options.set_size ? sa : sb;
      const auto v = table.vector(picks[i]);
      for (std::size_t k = 0; k < dim; ++k) target[k] += v[k];
    }
    values.push_back(cosine(sa, sb));
  }

  Baseline out;
  out.trials = options.trials;
  out.set_size = options.set_size;
  out.exclude_top = skip;
  out.seed = options.seed;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

std::vector<LabeledKeywords> read_keyword_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open keyword file " + path.string());
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw ParseError(path.string(), 1, "empty keyword file");
  std::optional<std::size_t> label_col, keywords_col;
  for (std::size_t i = 0; i < header->size(); ++i) {
    if ((*header)[i] == "label") label_col = i;
    if ((*header)[i] == "keywords") keywords_col = i;
  }
  if (!label_col || !keywords_col)
    throw ParseError(path.string(), reader.record_line(), "header needs 'label' and 'keywords' columns");

  std::vector<LabeledKeywords> sets;
  while (auto row = reader.next()) {
    if (row->size() != header->size())
      throw ParseError(path.string(), reader.record_line(), "wrong number of fields");
    LabeledKeywords set;
    set.label = (*row)[*label_col];
    const auto& text = (*row)[*keywords_col];
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      const auto start = i;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      if (i > start) set.keywords.push_back(text.substr(start, i - start));
    }
    if (set.keywords.empty()) throw ParseError(path.string(), reader.record_line(), "keyword set is empty");
    sets.push_back(std::move(set));
  }
  return sets;
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

std::vector<std::string> merge_keywords(const std::vector<LabeledKeywords>& sets, const std::vector<std::size_t>& members) {
  std::vector<std::string> merged;
  std::unordered_set<std::string> seen;
  for (auto m : members)
    for (const auto& k : sets[m].keywords)
      if (seen.insert(k).second) merged.push_back(k);
  return merged;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

SimilarityReport match_topics(const EmbeddingTable& table, const std::vector<LabeledKeywords>& side_a,
                              const std::vector<LabeledKeywords>& side_b, double threshold, OovPolicy policy,
                              const SurfaceForms* surface) {
  SimilarityReport report;
  report.threshold = threshold;

  auto embed = [&](const std::vector<LabeledKeywords>& sets) {
    std::vector<std::optional<SetVector>> out;
    for (const auto& s : sets) {
      try {
        out.push_back(set_vector(table, s.keywords, policy, surface));
      } catch (const DataError&) {
        if (policy == OovPolicy::Error) throw;
        out.push_back(std::nullopt);
      }
    }
    return out;
  };
  const auto va = embed(side_a);
  const auto vb = embed(side_b);

  const std::size_t na = side_a.size(), nb = side_b.size();
  std::vector<double> sim(na * nb, -2.0);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j)
      if (va[i] && vb[j]) sim[i * nb + j] = cosine(va[i]->vector, vb[j]->vector);

  // Nodes 0..na-1 are side A, na..na+nb-1 side B.
  std::vector<std::size_t> parent(na + nb);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<bool> linked(na + nb, false);
  auto link = [&](std::size_t i, std::size_t j) {
    linked[i] = linked[na + j] = true;
    parent[find_root(parent, i)] = find_root(parent, na + j);
  };
  for (std::size_t i = 0; i < na; ++i) {
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < nb; ++j)
      if (sim[i * nb + j] > -2.0 && (!best || sim[i * nb + j] > sim[i * nb + *best])) best = j;
    if (best && sim[i * nb + *best] >= threshold) link(i, *best);
  }
  for (std::size_t j = 0; j < nb; ++j) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < na; ++i)
      if (sim[i * nb + j] > -2.0 && (!best || sim[i * nb + j] > sim[*best * nb + j])) best = i;
    if (best && sim[*best * nb + j] >= threshold) link(*best, j);
  }

  std::map<std::size_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> components;
  std::vector<std::size_t> component_order;
  for (std::size_t i = 0; i < na; ++i) {
    if (!linked[i]) {
      report.unmatched_a.push_back(side_a[i].label);
      continue;
    }
    const auto root = find_root(parent, i);
    if (!components.count(root)) component_order.push_back(root);
    components[root].first.push_back(i);
  }
  for (std::size_t j = 0; j < nb; ++j) {
    if (!linked[na + j]) {
      report.unmatched_b.push_back(side_b[j].label);
      continue;
    }
    components[find_root(parent, na + j)].second.push_back(j);
  }

  for (auto root : component_order) {
    const auto& [members_a, members_b] = components[root];
    MatchedPair pair;
    for (auto i : members_a) pair.labels_a.push_back(side_a[i].label);
    for (auto j : members_b) pair.labels_b.push_back(side_b[j].label);
    pair.label = join(pair.labels_a, " + ");
    pair.keywords_a = merge_keywords(side_a, members_a);
    pair.keywords_b = merge_keywords(side_b, members_b);
    const auto a = set_vector(table, pair.keywords_a, policy, surface);
    const auto b = set_vector(table, pair.keywords_b, policy, surface);
    pair.cosine = cosine(a.vector, b.vector);
    pair.oov_a = a.oov;
    pair.oov_b = b.oov;
    report.pairs.push_back(std::move(pair));
  }
  return report;
}

void write_similarity_csv(const SimilarityReport& report, std::ostream& out) {
  out << "topic,cosine,oov_a,oov_b\n";
  for (const auto& p : report.pairs)
    out << csv::escape(p.label) << ',' << fmt::format("{}", p.cosine) << ',' << csv::escape(join(p.oov_a, " ")) << ','
        << csv::escape(join(p.oov_b, " ")) << '\n';
}

std::string similarity_summary_json(const SimilarityReport& report) {
  nlohmann::ordered_json j;
  j["threshold"] = report.threshold;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& p : report.pairs) {
    nlohmann::ordered_json item;
    item["topic"] = p.label;
    item["labels_a"] = p.labels_a;
    item["labels_b"] = p.labels_b;
    item["keywords_a"] = p.keywords_a;
    item["keywords_b"] = p.keywords_b;
    item["cosine"] = p.cosine;
    item["oov_a"] = p.oov_a;
    item["oov_b"] = p.oov_b;
    pairs.push_back(std::move(item));
  }
  j["pairs"] = pairs;
  j["unmatched_a"] = report.unmatched_a;
  j["unmatched_b"] = report.unmatched_b;
  if (report.baseline) {
    const auto& b = *report.baseline;
    j["baseline"] = {{"mean", b.mean}, {"sd", b.sd}, {"trials", b.trials}, {"set_size", b.set_size},
                     {"exclude_top", b.exclude_top}, {"seed", b.seed}};
  } else {
    j["baseline"] = nullptr;
  }
  return j.dump(2);
}

}  // namespace headroom
