// Acceptance checks, one line per criterion. Usage: acceptance [N ...]
// Exit status: 0 all selected criteria passed (or some skipped), 1 any
// failed, 77 every selected criterion was skipped.

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "headroom/agreement.hpp"
#include "headroom/cli.hpp"
#include "headroom/fightin.hpp"
#include "headroom/lexicon.hpp"
#include "headroom/semsim.hpp"
#include "headroom/synthgen.hpp"
#include "headroom/topicmodel.hpp"
#include "test_util.hpp"

using namespace headroom;
using namespace headroom::testing;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome pass(std::string d) { return {Status::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::Fail, std::move(d)}; }
Outcome skip(std::string d) { return {Status::Skip, std::move(d)}; }

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

CategoryCounts counts_of(std::vector<std::string> names, std::vector<std::int64_t> counts) {
  CategoryCounts c;
  c.names = std::move(names);
  c.counts = std::move(counts);
  return c;
}

// 1 -------------------------------------------------------------------------
Outcome plan_exactness() {
  const auto jobs = expand_plan(reference_plan());
  std::map<Race, int> race;
  std::map<Gender, int> gender;
  int pre = 0, post = 0, blog = 0;
  for (const auto& j : jobs) {
    ++race[j.profile.race];
    ++gender[j.profile.gender];
    (j.profile.phase == Phase::PreCovid ? pre : post)++;
    blog += j.profile.context == Context::BlogPost;
  }
  bool ok = jobs.size() == 3120 && pre == 1440 && post == 1680 && blog == 720 && race.size() == 4 &&
            gender.size() == 2;
  for (const auto& [r, n] : race) ok = ok && n == 780;
  for (const auto& [g, n] : gender) ok = ok && n == 1560;
  const auto detail = fmt::format("jobs={} per-race=780x{} pre={} post={} blog={} per-gender={}", jobs.size(),
                                  race.size(), pre, post, blog, gender.empty() ? 0 : gender.begin()->second);
  return ok ? pass(detail) : fail(detail);
}

// 2 -------------------------------------------------------------------------
Outcome logodds_oracle() {
  std::ifstream in(std::string(HEADROOM_TEST_DATA) + "/logodds_oracle.json");
  if (!in) return fail("oracle fixture file missing");
  const auto fixtures = nlohmann::json::parse(in);
  double worst = 0.0;
  bool exact = true;
  double max_shrunk = 0.0;
  for (const auto& f : fixtures) {
    const auto names = f["names"].get<std::vector<std::string>>();
    const auto a = counts_of(names, f["counts_i"]);
    const auto b = counts_of(names, f["counts_j"]);
    const auto prior = prior_from_counts(counts_of(names, f["reference"]), f["scale"].get<double>());
    const auto ab = log_odds(a, b, prior);
    const auto ba = log_odds(b, a, prior);
    const auto aa = log_odds(a, a, prior);
    const auto shrunk = log_odds(a, b, prior_from_counts(counts_of(names, f["reference"]), 1e9));
    for (std::size_t c = 0; c < names.size(); ++c) {
      const auto& e = f["expected"][c];
      const double got[3] = {ab.categories[c].delta, ab.categories[c].variance, ab.categories[c].zscore};
      for (int q = 0; q < 3; ++q) {
        const double want = e[q].get<double>();
        worst = std::max(worst, std::abs(got[q] - want) / std::max(1.0, std::abs(want)));
      }
      exact = exact && ab.categories[c].delta == -ba.categories[c].delta && aa.categories[c].delta == 0.0;
      max_shrunk = std::max(max_shrunk, std::abs(shrunk.categories[c].delta));
    }
  }
  const auto detail = fmt::format("{} fixtures, max rel err {:.2e}, antisymmetry/null exact={}, max|delta| at 1e9={:.2e}",
                                  fixtures.size(), worst, exact, max_shrunk);
  return fixtures.size() >= 20 && worst <= 1e-9 && exact && max_shrunk < 1e-3 ? pass(detail) : fail(detail);
}

// 3 and 4 -------------------------------------------------------------------
struct Glove {
  EmbeddingTable table;
  Baseline baseline;
};

std::optional<Glove>& glove_cache() {
  static std::optional<Glove> cache;
  return cache;
}

const Glove* load_glove() {
  auto& cache = glove_cache();
  if (cache) return &*cache;
  const char* path = env("HEADROOM_GLOVE");
  if (!path || !std::filesystem::exists(path)) return nullptr;
  Glove g;
  g.table = load_embeddings(path, 300);
  BaselineOptions opts;  // 30 words, 1000 trials, top 1000 excluded
  g.baseline = random_baseline(g.table, opts);
  cache = std::move(g);
  return &*cache;
}

Outcome random_baseline_range() {
  const auto* g = load_glove();
  if (!g) return skip("set HEADROOM_GLOVE to glove.6B.300d.txt to run");
  const auto detail = fmt::format("mean={:.4f} sd={:.4f} over {} trials", g->baseline.mean, g->baseline.sd,
                                  g->baseline.trials);
  return g->baseline.mean >= 0.70 && g->baseline.mean <= 0.80 ? pass(detail) : fail(detail);
}

Outcome topic_similarity_ordering() {
  const auto* g = load_glove();
  if (!g) return skip("set HEADROOM_GLOVE to glove.6B.300d.txt to run");
  const std::string data = HEADROOM_DATA_DIR;
  const auto a = read_keyword_file(data + "/keywords_umd.csv");
  const auto b = read_keyword_file(data + "/keywords_headroom.csv");
  bool ok = a.size() == b.size();
  std::string detail;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    const double cos = topic_similarity(g->table, a[i].keywords, b[i].keywords, OovPolicy::Skip);
    ok = ok && cos > g->baseline.mean;
    detail += fmt::format("{}={:.4f} ", a[i].label, cos);
  }
  if (!ok) return fail(detail + fmt::format("baseline {:.4f}", g->baseline.mean));

  // Regression constants from tools/scripts/keyword_similarity.py, once
  // generated against the same embedding file.
  const auto locked = std::string(HEADROOM_TEST_DATA) + "/keyword_similarity_expected.csv";
  if (!std::filesystem::exists(locked))
    return pass(detail + fmt::format("all > baseline {:.4f}; regression constants not locked yet", g->baseline.mean));
  std::istringstream lines(read_text(locked));
  std::string line;
  while (std::getline(lines, line)) {
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || line.rfind("baseline,", 0) == 0) continue;
    const auto label = line.substr(0, comma);
    const double want = std::stod(line.substr(comma + 1));
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].label == label &&
          std::abs(topic_similarity(g->table, a[i].keywords, b[i].keywords, OovPolicy::Skip) - want) > 1e-6)
        return fail(detail + "differs from locked value for " + label);
  }
  return pass(detail + fmt::format("all > baseline {:.4f}; match locked constants", g->baseline.mean));
}

// 5 -------------------------------------------------------------------------
Outcome lda_recovery() {
  MixtureSpec spec;  // 200 docs x 50 tokens, 100-word blocks
  const auto corpus = mixture_corpus(
      spec, [](std::size_t d) { return d % 2 ? 1.0 : 0.0; },
      [](std::size_t d) { return profile_of(d % 2 ? Race::White : Race::Asian, Gender::Woman); });
  const auto built = build_matrix(corpus, 1);
  LdaOptions opts;
  opts.topics = 2;
  opts.iterations = 500;
  opts.seed = 11;
  const auto model = fit_lda(built, opts);

  // Best assignment of the two topics to the two blocks.
  std::size_t agree = 0;
  for (std::size_t d = 0; d < model.theta.rows; ++d) {
    const bool block1 = built.matrix.profiles[d].race == Race::White;
    agree += (model.theta(d, 1) > model.theta(d, 0)) == block1;
  }
  const auto n = model.theta.rows;
  const double purity = static_cast<double>(std::max(agree, n - agree)) / static_cast<double>(n);
  double worst_norm = 0.0;
  for (std::size_t k = 0; k < model.phi.rows; ++k) worst_norm = std::max(worst_norm, std::abs(model.phi.row_sum(k) - 1));
  for (std::size_t d = 0; d < n; ++d) worst_norm = std::max(worst_norm, std::abs(model.theta.row_sum(d) - 1));
  const auto again = fit_lda(built, opts);
  const bool identical = again.phi == model.phi && again.theta == model.theta;
  const auto detail = fmt::format("purity={:.3f} max norm err={:.1e} identical refit={}", purity, worst_norm, identical);
  return purity >= 0.9 && worst_norm <= 1e-6 && identical ? pass(detail) : fail(detail);
}

// 6 -------------------------------------------------------------------------
Outcome prevalence_regression() {
  // Group A (Asian) uses block 1 for 70% of tokens, group B (White) for 30%.
  // Within each group, women and men share the same rate for the control.
  MixtureSpec spec;
  spec.documents = 400;
  spec.seed = 5;
  auto profile = [](std::size_t d) {
    return profile_of(d < 200 ? Race::Asian : Race::White, d % 2 ? Gender::Man : Gender::Woman);
  };
  const auto corpus = mixture_corpus(spec, [](std::size_t d) { return d < 200 ? 0.7 : 0.3; }, profile);
  const auto built = build_matrix(corpus, 1);
  LdaOptions opts;
  opts.topics = 2;
  // A flat Dirichlet: the 50/K default pulls 50-token documents halfway
  // to uniform, and a sparse one favors whole-document topics.
  opts.alpha = 1.0;
  opts.iterations = 500;
  opts.seed = 3;
  const auto model = fit_lda(built, opts);

  // The modeled topic carrying block-1 ("vz") words.
  std::size_t topic1 = 0;
  double best = -1;
  for (std::size_t k = 0; k < model.topics; ++k) {
    double mass = 0;
    for (std::size_t v = 0; v < model.vocabulary.size(); ++v)
      if (model.vocabulary.term(v).rfind("vz", 0) == 0) mass += model.phi(k, v);
    if (mass > best) best = mass, topic1 = k;
  }

  PrevalenceOptions popts;
  popts.seed = 9;
  const auto asian = ProfileFilter::parse("race=asian");
  const auto white = ProfileFilter::parse("race=white");
  const auto est = prevalence_diff(model, built.matrix, asian, white, popts);
  const auto& e = est[topic1];
  const bool main_ok = std::abs(e.mean_diff - 0.4) <= 0.1 && e.ci_low > 0.0;

  bool control_ok = true;
  std::string control;
  for (const char* group : {"race=asian", "race=white"}) {
    const auto women = ProfileFilter::parse(std::string(group) + ",gender=woman");
    const auto men = ProfileFilter::parse(std::string(group) + ",gender=man");
    for (const auto& c : prevalence_diff(model, built.matrix, women, men, popts)) {
      control_ok = control_ok && c.ci_low <= 0.0 && c.ci_high >= 0.0;
      control += fmt::format(" [{:+.3f},{:+.3f}]", c.ci_low, c.ci_high);
    }
    for (const auto& c : prevalence_diff(model, built.matrix, women, women, popts))
      control_ok = control_ok && c.ci_low <= 0.0 && c.ci_high >= 0.0;
  }
  const auto detail = fmt::format("mean_diff={:.4f} CI=[{:.4f}, {:.4f}]; same-rate controls:{}", e.mean_diff, e.ci_low,
                                  e.ci_high, control);
  return main_ok && control_ok ? pass(detail) : fail(detail);
}

// 7 -------------------------------------------------------------------------
Outcome kappa_checks() {
  const double perfect = fleiss_kappa({{"a", "b", "c"}, {{4, 0, 0}, {0, 4, 0}, {0, 0, 4}}}).kappa;
  const double chance = fleiss_kappa({{"a", "b"}, {{2, 0}, {0, 2}, {1, 1}, {1, 1}}}).kappa;
  const double worked = fleiss_kappa({{"1", "2", "3", "4", "5"},
                                      {{0, 0, 0, 0, 14},
                                       {0, 2, 6, 4, 2},
                                       {0, 0, 3, 5, 6},
                                       {0, 3, 9, 2, 0},
                                       {2, 2, 8, 1, 1},
                                       {7, 7, 0, 0, 0},
                                       {3, 2, 6, 3, 0},
                                       {2, 5, 3, 2, 2},
                                       {6, 5, 2, 1, 0},
                                       {0, 2, 2, 3, 7}}})
                            .kappa;
  const double reference = 0.20993070442195522;  // statsmodels
  const auto detail = fmt::format("perfect={} chance={:.1e} worked={:.3f} (reference {:.3f})", perfect, chance, worked,
                                  reference);
  return perfect == 1.0 && std::abs(chance) < 1e-9 && std::round(worked * 1000) == std::round(reference * 1000)
             ? pass(detail)
             : fail(detail);
}

// 8 -------------------------------------------------------------------------
Outcome lexicon_semantics() {
  const auto lex = parse_lexicon(std::string(HEADROOM_DATA_DIR) + "/lexicon/fixture.dic");
  std::set<std::string> father;
  for (int id : lex.match("father")) father.insert(lex.name_of(id));
  const bool father_ok = father == std::set<std::string>{"male", "family", "social"};

  MixtureSpec spec;
  spec.documents = 1;
  std::mt19937_64 rng(21);
  const std::vector<std::string> words = {"father", "mother", "worried", "money", "friends", "sad",
                                          "work",   "the",    "we",      "i",     "home",    "bills"};
  bool additive = true;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Document> docs;
    for (int d = 0; d < 50; ++d) {
      Document doc;
      doc.id = std::to_string(d);
      for (int w = 0; w < 30; ++w) doc.text += words[rng() % words.size()] + " ";
      docs.push_back(doc);
    }
    std::vector<Document> left, right;
    for (const auto& d : docs) (rng() % 2 ? left : right).push_back(d);
    auto parts = count_categories(lex, Corpus(left));
    parts += count_categories(lex, Corpus(right));
    additive = additive && parts == count_categories(lex, Corpus(docs));
  }
  std::string got;
  for (const auto& f : father) got += f + " ";
  const auto detail = fmt::format("father -> {{ {}}}; additivity over 20 random splits exact={}", got, additive);
  return father_ok && additive ? pass(detail) : fail(detail);
}

// 9 -------------------------------------------------------------------------
Outcome liwc_smoke() {
  const char* dic = env("HEADROOM_LIWC");
  const char* corpus_path = env("HEADROOM_CORPUS");
  if (!dic || !corpus_path)
    return skip("exact category values and the annotation kappa need LIWC 2015, reference prior counts and rater labels; "
                "set HEADROOM_LIWC and HEADROOM_CORPUS for the directional smoke test");
  const auto lex = parse_lexicon(dic);
  const auto corpus = load_corpus(corpus_path);
  const auto women = count_categories(lex, filter_corpus(corpus, ProfileFilter::parse("gender=woman")));
  const auto men = count_categories(lex, filter_corpus(corpus, ProfileFilter::parse("gender=man")));
  const auto r = log_odds(women, men, uniform_prior(women.names, kDefaultPriorScale));
  const auto top = top_k(r, 1, Direction::Positive);
  const auto detail = fmt::format("top women(+) category: {} ({:.2f})", top.entries[0].first, top.entries[0].second);
  return top.entries[0].first == "female" ? pass(detail) : fail(detail);
}

// 10 ------------------------------------------------------------------------
Outcome mock_pipeline() {
  TempDir dir;
  const std::string config = std::string(HEADROOM_SOURCE_DIR) + "/configs/mock_pipeline.json";
  const std::vector<std::vector<std::string>> steps = {
      {"generate"}, {"stats"}, {"topics"}, {"prevalence"}, {"logodds"}};
  for (const char* run : {"run1", "run2"}) {
    for (const auto& step : steps) {
      std::vector<std::string> args = {"--config", config, "--mock", "--seed", "7", "--out", (dir / run).string()};
      args.insert(args.end(), step.begin(), step.end());
      std::ostringstream out, err;
      const int code = run_cli(args, out, err);
      if (code != 0) return fail(fmt::format("{} {} exited {}: {}", run, step[0], code, err.str()));
    }
  }
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "run1")) {
    const auto other = dir / "run2" / entry.path().filename();
    if (!std::filesystem::exists(other)) return fail("missing in second run: " + entry.path().filename().string());
    if (read_text(entry.path()) != read_text(other))
      return fail("outputs differ: " + entry.path().filename().string());
    ++files;
  }
  std::size_t files2 = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "run2")) ++files2;
  if (files != files2) return fail("runs produced different file sets");
  return pass(fmt::format("5 commands exit 0 in both runs; {} output files byte-identical", files));
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"generation-plan exactness", plan_exactness},
      {"log-odds oracle equivalence", logodds_oracle},
      {"random-words baseline", random_baseline_range},
      {"topic-similarity ordering", topic_similarity_ordering},
      {"LDA recovery", lda_recovery},
      {"prevalence regression", prevalence_regression},
      {"Fleiss kappa", kappa_checks},
      {"lexicon semantics", lexicon_semantics},
      {"proprietary-data smoke test", liwc_smoke},
      {"end-to-end mock pipeline", mock_pipeline},
  };

  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion " << argv[i] << '\n';
      return 2;
    }
    selected.push_back(static_cast<std::size_t>(n - 1));
  }
  if (selected.empty())
    for (std::size_t i = 0; i < criteria.size(); ++i) selected.push_back(i);

  int failed = 0, skipped = 0;
  for (auto i : selected) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    std::cout << fmt::format("[{}] criterion {:>2} {}: {}\n", tag, i + 1, criteria[i].first, o.detail);
    failed += o.status == Status::Fail;
    skipped += o.status == Status::Skip;
  }
  if (failed) return 1;
  if (skipped == static_cast<int>(selected.size())) return 77;
  return 0;
}
