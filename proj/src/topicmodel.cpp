#include "headroom/topicmodel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <thread>

#include "headroom/csv.hpp"
#include "headroom/error.hpp"
#include "headroom/text.hpp"

namespace headroom {

double Matrix::row_sum(std::size_t r) const {
  double sum = 0.0;
  for (std::size_t c = 0; c < cols; ++c) sum += (*this)(r, c);
  return sum;
}

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq)
    : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)) {
  if (doc_freq_.empty()) doc_freq_.assign(terms_.size(), 0);
  if (doc_freq_.size() != terms_.size()) throw DataError("vocabulary document frequencies misaligned");
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i)
    if (!index_.emplace(terms_[i], i).second) throw DataError("duplicate vocabulary term '" + terms_[i] + "'");
}

std::optional<std::size_t> Vocabulary::index(const std::string& term) const {
  auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t DocTermMatrix::row_total(std::size_t d) const {
  std::uint64_t total = 0;
  for (auto [term, count] : rows[d]) total += count;
  return total;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've", "you'll", "you'd",
      "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself", "she", "she's", "her", "hers",
      "herself", "it", "it's", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
      "who", "whom", "this", "that", "that'll", "these", "those", "am", "is", "are", "was", "were", "be", "been",
      "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if",
      "or", "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against", "between",
      "into", "through", "during", "before", "after", "above", "below", "to", "from", "up", "down", "in", "out",
      "on", "off", "over", "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
      "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor", "not",
      "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will", "just", "don", "don't",
      "should", "should've", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn",
      "couldn't", "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't",
      "isn", "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't",
      "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn", "wouldn't",
      "i'm", "i've", "i'll", "i'd", "can't"};
  return words;
}

BuiltMatrix build_matrix(const Corpus& corpus, std::size_t min_df, const std::set<std::string>& stopwords) {
  if (corpus.empty()) throw DataError("cannot build a document-term matrix from an empty corpus");
  min_df = std::max<std::size_t>(min_df, 1);
  if (min_df > corpus.size())
    throw DataError("min_df " + std::to_string(min_df) + " exceeds the number of documents (" +
                    std::to_string(corpus.size()) + ")");

  std::vector<std::map<std::string, std::uint32_t>> doc_counts(corpus.size());
  std::map<std::string, std::size_t> df;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    auto stream = tokenize(corpus[d].text);
    for (std::size_t i = 0; i < stream.size(); ++i) {
      if (stopwords.count(stream.tokens[i])) continue;
      ++doc_counts[d][stream.stems[i]];
    }
    for (const auto& [stem, count] : doc_counts[d]) ++df[stem];
  }

  std::vector<std::string> terms;
  std::vector<std::size_t> freqs;
  for (const auto& [stem, freq] : df) {
    if (freq >= min_df) {
      terms.push_back(stem);
      freqs.push_back(freq);
    }
  }
  if (terms.empty()) throw DataError("vocabulary is empty after min_df/stopword filtering");

  BuiltMatrix built{Vocabulary(std::move(terms), std::move(freqs)), {}};
  auto& m = built.matrix;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> row;
    for (const auto& [stem, count] : doc_counts[d])
      if (auto idx = built.vocabulary.index(stem)) row.emplace_back(static_cast<std::uint32_t>(*idx), count);
    if (row.empty()) {
      ++m.dropped_documents;
      continue;
    }
    m.rows.push_back(std::move(row));  // map order == sorted stems == sorted term index
    m.profiles.push_back(corpus[d].profile);
    m.doc_ids.push_back(corpus[d].id);
  }
  return built;
}

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

TopicModel fit_lda(const BuiltMatrix& built, const LdaOptions& options) {
  const auto& matrix = built.matrix;
  const std::size_t K = options.topics;
  const std::size_t V = built.vocabulary.size();
  const std::size_t D = matrix.size();
  const double alpha = options.alpha.value_or(50.0 / static_cast<double>(K));
  const double beta = options.beta;

  if (K < 2) throw ConfigError("topic count must be at least 2");
  if (options.iterations < 1) throw ConfigError("iterations must be at least 1");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("LDA hyperparameters must be positive");
  if (D == 0) throw DataError("document-term matrix has no documents");
  if (K > V) throw ConfigError("topic count " + std::to_string(K) + " exceeds vocabulary size " + std::to_string(V));

  std::vector<std::uint32_t> words;
  std::vector<std::uint32_t> doc_of;
  for (std::size_t d = 0; d < D; ++d)
    for (auto [term, count] : matrix.rows[d])
      for (std::uint32_t i = 0; i < count; ++i) {
        words.push_back(term);
        doc_of.push_back(static_cast<std::uint32_t>(d));
      }

  std::mt19937_64 rng(splitmix64(options.seed));
  std::vector<std::uint32_t> z(words.size());
  std::vector<std::uint32_t> ndk(D * K, 0), nkw(K * V, 0), nk(K, 0);
  std::vector<std::uint32_t> nd(D, 0);
  for (std::size_t t = 0; t < words.size(); ++t) {
    const auto k = static_cast<std::uint32_t>(rng() % K);
    z[t] = k;
    ++ndk[doc_of[t] * K + k];
    ++nkw[k * V + words[t]];
    ++nk[k];
    ++nd[doc_of[t]];
  }

  const double v_beta = static_cast<double>(V) * beta;
  auto log_likelihood = [&] {
    double ll = static_cast<double>(K) * (std::lgamma(v_beta) - static_cast<double>(V) * std::lgamma(beta));
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t w = 0; w < V; ++w) ll += std::lgamma(nkw[k * V + w] + beta);
      ll -= std::lgamma(nk[k] + v_beta);
    }
    return ll;
  };

  TopicModel model;
  model.topics = K;
  model.vocabulary = built.vocabulary;
  model.doc_ids = matrix.doc_ids;
  model.alpha = alpha;
  model.beta = beta;
  model.seed = options.seed;
  model.iterations = options.iterations;
  model.burn_in = options.burn_in;
  model.phi = Matrix(K, V);
  model.theta = Matrix(D, K);

  const std::size_t after_burn_in = options.iterations > options.burn_in ? options.iterations - options.burn_in : 0;
  const std::size_t samples = std::max<std::size_t>(1, std::min(options.samples, after_burn_in));
  model.samples = samples;
  const std::size_t first_sample = options.iterations - samples + 1;

  std::vector<double> cumulative(K);
  for (std::size_t it = 1; it <= options.iterations; ++it) {
    for (std::size_t t = 0; t < words.size(); ++t) {
      const auto w = words[t];
      const auto d = doc_of[t];
      auto k = z[t];
      --ndk[d * K + k];
      --nkw[k * V + w];
      --nk[k];

      double total = 0.0;
      for (std::size_t j = 0; j < K; ++j) {
        total += (ndk[d * K + j] + alpha) * (nkw[j * V + w] + beta) / (nk[j] + v_beta);
        cumulative[j] = total;
      }
      const double u = uniform01(rng) * total;
      k = static_cast<std::uint32_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
      if (k >= K) k = static_cast<std::uint32_t>(K - 1);

      z[t] = k;
      ++ndk[d * K + k];
      ++nkw[k * V + w];
      ++nk[k];
    }

    if ((options.loglik_every > 0 && it % options.loglik_every == 0) || it == options.iterations)
      model.loglik.emplace_back(it, log_likelihood());

    if (it >= first_sample) {
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t w = 0; w < V; ++w) model.phi(k, w) += (nkw[k * V + w] + beta) / (nk[k] + v_beta);
      const double k_alpha = static_cast<double>(K) * alpha;
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t k = 0; k < K; ++k) model.theta(d, k) += (ndk[d * K + k] + alpha) / (nd[d] + k_alpha);
    }
  }
  for (auto& x : model.phi.data) x /= static_cast<double>(samples);
  for (auto& x : model.theta.data) x /= static_cast<double>(samples);
  return model;
}

KeywordSet top_keywords(const TopicModel& model, std::size_t topic, std::size_t n) {
  if (topic >= model.topics)
    throw DataError("topic " + std::to_string(topic) + " out of range (K=" + std::to_string(model.topics) + ")");
  const std::size_t V = model.vocabulary.size();
  std::vector<std::size_t> order(V);
  std::iota(order.begin(), order.end(), 0);
  n = std::min(n, V);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double pa = model.phi(topic, a), pb = model.phi(topic, b);
                      return pa != pb ? pa > pb : a < b;
                    });
  KeywordSet set;
  set.topic = topic;
  for (std::size_t i = 0; i < n; ++i) set.keywords.push_back(model.vocabulary.term(order[i]));
  return set;
}

TopicMapping TopicMapping::identity(std::size_t topics) {
  TopicMapping mapping;
  for (std::size_t k = 0; k < topics; ++k) mapping.labels[k] = "topic-" + std::to_string(k);
  return mapping;
}

TopicMapping read_topic_mapping(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open topic mapping " + path.string());
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || header->size() < 2) throw ParseError(path.string(), 1, "expected header fine_topic_id,overarching_label");
  TopicMapping mapping;
  while (auto row = reader.next()) {
    const auto line = reader.record_line();
    if (row->size() < 2 || row->size() > 3) throw ParseError(path.string(), line, "expected 2 or 3 fields");
    std::size_t topic = 0;
    try {
      std::size_t pos = 0;
      const auto value = std::stoll((*row)[0], &pos);
      if (pos != (*row)[0].size() || value < 0) throw std::invalid_argument("bad id");
      topic = static_cast<std::size_t>(value);
    } catch (const std::exception&) {
      throw ParseError(path.string(), line, "fine_topic_id must be a non-negative integer");
    }
    const auto& label = (*row)[1];
    if (label.empty()) throw ParseError(path.string(), line, "empty overarching label");
    if (mapping.labels.count(topic)) throw ParseError(path.string(), line, "topic listed twice");
    mapping.labels[topic] = label == kFilteredLabel ? std::nullopt : std::optional<std::string>(label);
    if (row->size() == 3 && !(*row)[2].empty()) mapping.fine_labels[topic] = (*row)[2];
  }
  return mapping;
}

ConsolidatedTopics consolidate(const Matrix& theta, const TopicMapping& mapping) {
  for (const auto& [topic, label] : mapping.labels)
    if (topic >= theta.cols)
      throw DataError("topic mapping references unknown topic " + std::to_string(topic) + " (K=" +
                      std::to_string(theta.cols) + ")");

  ConsolidatedTopics out;
  std::vector<std::optional<std::size_t>> column_of(theta.cols);
  for (std::size_t k = 0; k < theta.cols; ++k) {
    auto it = mapping.labels.find(k);
    if (it == mapping.labels.end()) throw DataError("topic mapping does not cover topic " + std::to_string(k));
    if (!it->second) continue;
    auto pos = std::find(out.labels.begin(), out.labels.end(), *it->second);
    if (pos == out.labels.end()) {
      out.labels.push_back(*it->second);
      pos = out.labels.end() - 1;
    }
    column_of[k] = static_cast<std::size_t>(pos - out.labels.begin());
  }

  out.proportions = Matrix(theta.rows, out.labels.size());
  out.filtered_mass.assign(theta.rows, 0.0);
  for (std::size_t d = 0; d < theta.rows; ++d)
    for (std::size_t k = 0; k < theta.cols; ++k) {
      if (column_of[k])
        out.proportions(d, *column_of[k]) += theta(d, k);
      else
        out.filtered_mass[d] += theta(d, k);
    }
  return out;
}

namespace {

// Percentile interval over sorted values. The upper bound is interpolated
// from the top with the same fraction as the lower bound, so negating the
// sample mirrors the interval bit for bit.
std::pair<double, double> percentile_interval(const std::vector<double>& sorted, double confidence) {
  const std::size_t n = sorted.size();
  if (n == 1) return {sorted[0], sorted[0]};
  const double h = static_cast<double>(n - 1) * (1.0 - confidence) / 2.0;
  const auto i = static_cast<std::size_t>(std::floor(h));
  const double f = h - static_cast<double>(i);
  const double low = i + 1 < n ? sorted[i] + f * (sorted[i + 1] - sorted[i]) : sorted[i];
  const std::size_t j = n - 1 - i;
  const double high = j >= 1 ? sorted[j] - f * (sorted[j] - sorted[j - 1]) : sorted[j];
  return {low, high};
}

std::vector<double> column_means(const Matrix& m, const std::vector<std::size_t>& rows) {
  std::vector<double> mean(m.cols, 0.0);
  for (auto r : rows)
    for (std::size_t c = 0; c < m.cols; ++c) mean[c] += m(r, c);
  for (auto& x : mean) x /= static_cast<double>(rows.size());
  return mean;
}

}  // namespace

std::vector<PrevalenceEstimate> prevalence_diff(const Matrix& proportions,
                                                const std::vector<DemographicProfile>& profiles,
                                                const ProfilePredicate& group_a, const ProfilePredicate& group_b,
                                                const PrevalenceOptions& options,
                                                const std::vector<std::string>& labels) {
  if (profiles.size() != proportions.rows) throw DataError("profiles do not align with proportion rows");
  if (options.replicates < 100) throw ConfigError("bootstrap needs at least 100 replicates");
  if (!(options.confidence > 0.0 && options.confidence < 1.0)) throw ConfigError("confidence must be in (0, 1)");
  if (!labels.empty() && labels.size() != proportions.cols) throw DataError("labels do not align with columns");

  std::vector<std::size_t> rows_a, rows_b;
  for (std::size_t d = 0; d < profiles.size(); ++d) {
    if (group_a(profiles[d])) rows_a.push_back(d);
    if (group_b(profiles[d])) rows_b.push_back(d);
  }
  if (rows_a.empty()) throw DataError("group A matches no documents");
  if (rows_b.empty()) throw DataError("group B matches no documents");

  const std::size_t cols = proportions.cols;
  const auto mean_a = column_means(proportions, rows_a);
  const auto mean_b = column_means(proportions, rows_b);

  // Random draws go to the groups in a canonical order so that swapping A and
  // B resamples each group identically.
  const bool a_first = rows_a <= rows_b;
  const auto& first = a_first ? rows_a : rows_b;
  const auto& second = a_first ? rows_b : rows_a;

  const std::size_t B = options.replicates;
  Matrix replicate_diff(B, cols);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> sample_first(first.size()), sample_second(second.size());
    for (std::size_t b = begin; b < end; ++b) {
      std::mt19937_64 rng(splitmix64(options.seed ^ splitmix64(b + 1)));
      for (auto& r : sample_first) r = first[rng() % first.size()];
      for (auto& r : sample_second) r = second[rng() % second.size()];
      const auto m_first = column_means(proportions, sample_first);
      const auto m_second = column_means(proportions, sample_second);
      for (std::size_t c = 0; c < cols; ++c)
        replicate_diff(b, c) = a_first ? m_first[c] - m_second[c] : m_second[c] - m_first[c];
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(B)));
  if (threads == 1) {
    run_range(0, B);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(run_range, B * t / threads, B * (t + 1) / threads);
  }

  std::vector<PrevalenceEstimate> out;
  std::vector<double> column(B);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t b = 0; b < B; ++b) column[b] = replicate_diff(b, c);
    std::sort(column.begin(), column.end());
    auto [low, high] = percentile_interval(column, options.confidence);
    PrevalenceEstimate est;
    est.topic = c;
    est.label = labels.empty() ? "topic-" + std::to_string(c) : labels[c];
    est.mean_diff = mean_a[c] - mean_b[c];
    // Percentile intervals need not contain the point estimate; widen to it.
    est.ci_low = std::min(low, est.mean_diff);
    est.ci_high = std::max(high, est.mean_diff);
    out.push_back(std::move(est));
  }
  return out;
}

std::vector<PrevalenceEstimate> prevalence_diff(const TopicModel& model, const DocTermMatrix& matrix,
                                                const ProfilePredicate& group_a, const ProfilePredicate& group_b,
                                                const PrevalenceOptions& options) {
  if (model.doc_ids != matrix.doc_ids) throw DataError("topic model and matrix cover different documents");
  return prevalence_diff(model.theta, matrix.profiles, group_a, group_b, options);
}

void write_prevalence_csv(const std::vector<PrevalenceEstimate>& estimates, std::ostream& out) {
  out << "topic,label,mean_diff,ci_low,ci_high\n";
  for (const auto& e : estimates)
    out << e.topic << ',' << csv::escape(e.label) << ',' << fmt::format("{},{},{}", e.mean_diff, e.ci_low, e.ci_high)
        << '\n';
}

namespace {

constexpr const char* kModelFormat = "headroom-topic-model";
constexpr int kModelVersion = 1;

nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < m.rows; ++r)
    rows.push_back(std::vector<double>(m.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols),
                                       m.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * m.cols)));
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& rows, std::size_t cols) {
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw DataError("model matrix row has wrong width");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

}  // namespace

void save_model(const TopicModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["topics"] = model.topics;
  j["alpha"] = model.alpha;
  j["beta"] = model.beta;
  j["seed"] = model.seed;
  j["iterations"] = model.iterations;
  j["burn_in"] = model.burn_in;
  j["samples"] = model.samples;
  j["vocabulary"] = model.vocabulary.terms();
  j["doc_freq"] = model.vocabulary.doc_freq();
  j["doc_ids"] = model.doc_ids;
  auto ll = nlohmann::ordered_json::array();
  for (auto [it, value] : model.loglik) ll.push_back({it, value});
  j["loglik"] = ll;
  j["phi"] = matrix_to_json(model.phi);
  j["theta"] = matrix_to_json(model.theta);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model file " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("error writing " + path.string());
}

TopicModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != kModelFormat) throw DataError(path.string() + " is not a topic model file");
    if (j.at("version").get<int>() != kModelVersion)
      throw DataError("unsupported topic model version " + j.at("version").dump());
    TopicModel model;
    model.topics = j.at("topics").get<std::size_t>();
    model.alpha = j.at("alpha").get<double>();
    model.beta = j.at("beta").get<double>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.iterations = j.at("iterations").get<std::size_t>();
    model.burn_in = j.at("burn_in").get<std::size_t>();
    model.samples = j.at("samples").get<std::size_t>();
    model.vocabulary = Vocabulary(j.at("vocabulary").get<std::vector<std::string>>(),
                                  j.at("doc_freq").get<std::vector<std::size_t>>());
    model.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
    for (const auto& entry : j.at("loglik")) model.loglik.emplace_back(entry[0].get<std::size_t>(), entry[1].get<double>());
    model.phi = matrix_from_json(j.at("phi"), model.vocabulary.size());
    model.theta = matrix_from_json(j.at("theta"), model.topics);
    if (model.phi.rows != model.topics || model.theta.rows != model.doc_ids.size())
      throw DataError("topic model dimensions are inconsistent");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model file " + path.string() + ": " + e.what());
  }
}

}  // namespace headroom
