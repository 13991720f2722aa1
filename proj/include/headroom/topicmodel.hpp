#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "headroom/corpus.hpp"

namespace headroom {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double row_sum(std::size_t r) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq = {});

  std::size_t size() const { return terms_.size(); }
  const std::string& term(std::size_t i) const { return terms_[i]; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<std::size_t>& doc_freq() const { return doc_freq_; }
  std::optional<std::size_t> index(const std::string& term) const;

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> doc_freq_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct DocTermMatrix {
  // (term index, count) sorted by term index; every row non-empty.
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> rows;
  std::vector<DemographicProfile> profiles;
  std::vector<std::string> doc_ids;
  std::size_t dropped_documents = 0;  // emptied by filtering

  std::size_t size() const { return rows.size(); }
  std::uint64_t row_total(std::size_t d) const;
};

// English function words (the usual NLTK list).
const std::set<std::string>& default_stopwords();

struct BuiltMatrix {
  Vocabulary vocabulary;
  DocTermMatrix matrix;
};

// Stopwords are matched against raw tokens; the vocabulary holds Porter
// stems with document frequency >= min_df. Terms are sorted.
BuiltMatrix build_matrix(const Corpus& corpus, std::size_t min_df,
                         const std::set<std::string>& stopwords = default_stopwords());

struct LdaOptions {
  std::size_t topics = 25;
  std::optional<double> alpha;  // defaults to 50 / topics
  double beta = 0.01;
  std::size_t iterations = 1000;
  std::size_t burn_in = 200;
  std::size_t samples = 10;  // final iterations averaged into phi and theta
  std::uint64_t seed = 1;
  std::size_t loglik_every = 50;
};

struct TopicModel {
  std::size_t topics = 0;
  Vocabulary vocabulary;
  std::vector<std::string> doc_ids;
  Matrix phi;    // topics x terms
  Matrix theta;  // documents x topics
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::size_t burn_in = 0;
  std::size_t samples = 0;
  // (iteration, log p(w | z)) every loglik_every iterations and at the end.
  std::vector<std::pair<std::size_t, double>> loglik;
};

// Collapsed Gibbs sampling. Deterministic for a fixed seed.
TopicModel fit_lda(const BuiltMatrix& built, const LdaOptions& options);

struct KeywordSet {
  std::size_t topic = 0;
  std::vector<std::string> keywords;  // descending probability
  std::string label;
};

inline constexpr std::size_t kDefaultKeywordCount = 30;

// Highest-probability terms; ties go to the lower term index. n is clamped to V.
KeywordSet top_keywords(const TopicModel& model, std::size_t topic, std::size_t n = kDefaultKeywordCount);

// Fine topic -> overarching label; nullopt marks a filtered topic.
struct TopicMapping {
  std::map<std::size_t, std::optional<std::string>> labels;
  std::map<std::size_t, std::string> fine_labels;  // optional human names

  static TopicMapping identity(std::size_t topics);
};

inline constexpr const char* kFilteredLabel = "FILTERED";

// CSV: fine_topic_id,overarching_label[,fine_label]; label FILTERED drops the topic.
TopicMapping read_topic_mapping(const std::filesystem::path& path);

struct ConsolidatedTopics {
  std::vector<std::string> labels;  // order of first appearance by topic id
  Matrix proportions;               // documents x labels
  std::vector<double> filtered_mass;
};

ConsolidatedTopics consolidate(const Matrix& theta, const TopicMapping& mapping);

struct PrevalenceEstimate {
  std::size_t topic = 0;
  std::string label;
  double mean_diff = 0.0;  // mean over A minus mean over B
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct PrevalenceOptions {
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  double confidence = 0.95;
  unsigned threads = 1;
};

// Difference of group mean proportions per column with a percentile
// bootstrap CI (documents resampled within each group). Swapping the groups
// negates mean_diff and mirrors the interval exactly.
std::vector<PrevalenceEstimate> prevalence_diff(const Matrix& proportions,
                                                const std::vector<DemographicProfile>& profiles,
                                                const ProfilePredicate& group_a, const ProfilePredicate& group_b,
                                                const PrevalenceOptions& options,
                                                const std::vector<std::string>& labels = {});

std::vector<PrevalenceEstimate> prevalence_diff(const TopicModel& model, const DocTermMatrix& matrix,
                                                const ProfilePredicate& group_a, const ProfilePredicate& group_b,
                                                const PrevalenceOptions& options);

void write_prevalence_csv(const std::vector<PrevalenceEstimate>& estimates, std::ostream& out);

// Versioned JSON model file.
void save_model(const TopicModel& model, const std::filesystem::path& path);
TopicModel load_model(const std::filesystem::path& path);

}  // namespace headroom
