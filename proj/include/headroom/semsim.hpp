#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "headroom/corpus.hpp"

namespace headroom {

// Word vectors in file order (GloVe files are frequency ordered). Words are
// lowercased at load; the first occurrence of a word wins.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return words_.size(); }
  const std::string& word(std::size_t i) const { return words_[i]; }
  std::span<const float> vector(std::size_t i) const {
    return {values_.data() + i * dimension_, dimension_};
  }
  std::optional<std::size_t> find(const std::string& word) const;

  // Returns false (and ignores the row) for duplicates.
  bool add(std::string word, std::span<const float> values);

  std::size_t rejected_rows = 0;  // wrong dimension or unparseable

 private:
  std::size_t dimension_ = 0;
  std::vector<std::string> words_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// GloVe text format: "word v1 ... vd" per line.
EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dimension);
EmbeddingTable load_embeddings(std::istream& in, std::size_t dimension, const std::string& source_name = "<embeddings>");

enum class OovPolicy { Skip, BackoffUnstem, Error };

OovPolicy parse_oov_policy(const std::string& text);

// Most frequent surface token per Porter stem, for OovPolicy::BackoffUnstem.
class SurfaceForms {
 public:
  SurfaceForms() = default;
  static SurfaceForms from_corpus(const Corpus& corpus);
  std::optional<std::string> lookup(const std::string& stem) const;

 private:
  std::unordered_map<std::string, std::string> best_;
};

struct SetVector {
  std::vector<double> vector;
  std::vector<std::string> oov;  // keywords that could not be resolved
  std::size_t used = 0;          // distinct keywords averaged
};

// Mean of the vectors of the distinct keywords (first occurrence order).
// Throws DataError when every keyword is OOV or, under OovPolicy::Error,
// when any is.
SetVector set_vector(const EmbeddingTable& table, const std::vector<std::string>& keywords, OovPolicy policy,
                     const SurfaceForms* surface = nullptr);

double cosine(std::span<const double> a, std::span<const double> b);

double topic_similarity(const EmbeddingTable& table, const std::vector<std::string>& keywords_a,
                        const std::vector<std::string>& keywords_b, OovPolicy policy,
                        const SurfaceForms* surface = nullptr);

struct BaselineOptions {
  std::size_t set_size = 30;
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  // The most frequent entries (mostly function words) are never sampled.
  std::size_t exclude_top = 1000;
};

struct Baseline {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t trials = 0;
  std::size_t set_size = 0;
  std::size_t exclude_top = 0;
  std::uint64_t seed = 0;
};

// Cosine between averaged vectors of two disjoint, uniformly drawn word sets.
Baseline random_baseline(const EmbeddingTable& table, const BaselineOptions& options);

struct LabeledKeywords {
  std::string label;
  std::vector<std::string> keywords;
};

// CSV with a header containing "label" and "keywords" columns; keywords are
// whitespace separated.
std::vector<LabeledKeywords> read_keyword_file(const std::filesystem::path& path);

struct MatchedPair {
  std::string label;
  std::vector<std::string> labels_a, labels_b;  // constituents merged into this pair
  std::vector<std::string> keywords_a, keywords_b;
  double cosine = 0.0;
  std::vector<std::string> oov_a, oov_b;
};

struct SimilarityReport {
  std::vector<MatchedPair> pairs;
  std::vector<std::string> unmatched_a, unmatched_b;
  std::optional<Baseline> baseline;
  double threshold = 0.0;
};

// Each set is linked to its best counterpart on the other side when that
// cosine reaches the threshold. Linked components become one pair, with
// keyword sets merged (deduplicated union) on each side when a topic matched
// several counterparts.
SimilarityReport match_topics(const EmbeddingTable& table, const std::vector<LabeledKeywords>& side_a,
                              const std::vector<LabeledKeywords>& side_b, double threshold, OovPolicy policy,
                              const SurfaceForms* surface = nullptr);

// CSV: topic,cosine,oov_a,oov_b (OOV lists space separated).
void write_similarity_csv(const SimilarityReport& report, std::ostream& out);
// JSON summary: pairs, unmatched sets, threshold, baseline statistics.
std::string similarity_summary_json(const SimilarityReport& report);

}  // namespace headroom
