#include "headroom/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <type_traits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_map>

#include "headroom/agreement.hpp"
#include "headroom/corpus.hpp"
#include "headroom/csv.hpp"
#include "headroom/error.hpp"
#include "headroom/fightin.hpp"
#include "headroom/lexicon.hpp"
#include "headroom/semsim.hpp"

namespace headroom {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Config loading

template <typename T>
struct is_optional : std::false_type {};
template <typename T>
struct is_optional<std::optional<T>> : std::true_type {};

class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  // Call once all keys were consumed; unknown keys are errors.
  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw ConfigError("unknown config key " + where_ + "." + key);
  }

  template <typename T>
  void get(const char* key, T& target) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return;
    try {
      if constexpr (is_optional<T>::value)
        target = it->template get<typename T::value_type>();
      else
        target = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key " + where_ + "." + key + " has the wrong type");
    }
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

 private:
  const nlohmann::json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& value) {
  if (value.empty()) return {};
  fs::path p(value);
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

Race require_race(const std::string& text) {
  auto race = parse_race(text);
  if (race == Race::Other) throw ConfigError("generation plan race '" + text + "' is not one of the generated races");
  return race;
}

Gender require_gender(const std::string& text) {
  auto gender = parse_gender(text);
  if (gender == Gender::Other) throw ConfigError("generation plan gender '" + text + "' is not woman or man");
  return gender;
}

void read_generation(const nlohmann::json& node, RunConfig& cfg) {
  ConfigReader r(node, "generation");
  std::string plan_name = "reference";
  r.get("plan", plan_name);
  if (plan_name != "reference" && plan_name != "custom") throw ConfigError("generation.plan must be 'reference' or 'custom'");
  cfg.plan = reference_plan();

  std::vector<std::string> races, genders;
  r.get("races", races);
  r.get("genders", genders);
  if (!races.empty()) {
    cfg.plan.races.clear();
    for (const auto& s : races) cfg.plan.races.push_back(require_race(s));
  }
  if (!genders.empty()) {
    cfg.plan.genders.clear();
    for (const auto& s : genders) cfg.plan.genders.push_back(require_gender(s));
  }
  r.get("post_years", cfg.plan.post_years);
  r.get("temperature", cfg.plan.sampling.temperature);
  r.get("max_tokens", cfg.plan.sampling.max_tokens);
  bool article_correction = false;
  r.get("article_correction", article_correction);
  std::optional<std::string> year_clause;
  r.get("year_clause", year_clause);

  if (const auto* contexts = r.child("contexts")) {
    if (!contexts->is_array()) throw ConfigError("generation.contexts must be an array");
    cfg.plan.contexts.clear();
    for (const auto& c : *contexts) {
      ConfigReader cr(c, "generation.contexts[]");
      std::string name;
      cr.get("context", name);
      ContextPlan ctx;
      ctx.context = parse_context(name);
      if (ctx.context == Context::Unspecified) throw ConfigError("unknown generation context '" + name + "'");
      ctx.prompt.context_clause = default_context_clause(ctx.context);
      cr.get("count_pre", ctx.count_pre);
      cr.get("count_post", ctx.count_post);
      cr.get("template", ctx.prompt.text);
      cr.get("context_clause", ctx.prompt.context_clause);
      cr.get("year_clause", ctx.prompt.year_clause);
      cr.finish();
      cfg.plan.contexts.push_back(std::move(ctx));
    }
  }
  for (auto& ctx : cfg.plan.contexts) {
    ctx.prompt.article_correction = article_correction;
    if (year_clause) ctx.prompt.year_clause = *year_clause;
  }
  r.finish();
  cfg.plan.validate();
}

void read_llm(const nlohmann::json& node, RunConfig& cfg) {
  ConfigReader r(node, "llm");
  r.get("endpoint", cfg.llm.endpoint);
  r.get("model", cfg.llm.model);
  r.get("api_key_env", cfg.llm.api_key_env);
  std::string style = "completions";
  r.get("style", style);
  if (style == "completions")
    cfg.llm.style = ApiStyle::Completions;
  else if (style == "chat")
    cfg.llm.style = ApiStyle::Chat;
  else
    throw ConfigError("llm.style must be 'completions' or 'chat'");
  r.get("max_concurrent", cfg.llm.max_concurrent);
  r.get("max_attempts", cfg.llm.retry.max_attempts);
  std::int64_t backoff_ms = cfg.llm.retry.initial_backoff.count();
  r.get("backoff_ms", backoff_ms);
  cfg.llm.retry.initial_backoff = std::chrono::milliseconds(backoff_ms);
  r.get("backoff_multiplier", cfg.llm.retry.backoff_multiplier);
  r.get("timeout_s", cfg.llm.timeout_seconds);
  r.finish();
  if (cfg.llm.max_concurrent < 1) throw ConfigError("llm.max_concurrent must be >= 1");
  if (cfg.llm.retry.max_attempts < 1) throw ConfigError("llm.max_attempts must be >= 1");
}

}  // namespace

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  const auto base = fs::absolute(path).parent_path();

  RunConfig cfg;
  ConfigReader r(root, "config");
  r.get("seed", cfg.seed);
  std::string out;
  r.get("out", out);
  if (!out.empty()) cfg.out_dir = resolve(base, out);
  r.get("mock", cfg.mock);
  r.get("threads", cfg.threads);
  if (const auto* corpus = r.child("corpus")) {
    if (corpus->is_string()) {
      cfg.corpus_paths.push_back(resolve(base, corpus->get<std::string>()));
    } else if (corpus->is_array()) {
      for (const auto& p : *corpus) cfg.corpus_paths.push_back(resolve(base, p.get<std::string>()));
    } else {
      throw ConfigError("config.corpus must be a path or a list of paths");
    }
  }
  std::string lexicon;
  r.get("lexicon", lexicon);
  cfg.lexicon = resolve(base, lexicon);

  if (const auto* node = r.child("embeddings")) {
    ConfigReader e(*node, "embeddings");
    std::string p;
    e.get("path", p);
    cfg.embeddings = resolve(base, p);
    e.get("dimension", cfg.embedding_dimension);
    e.get("exclude_top", cfg.baseline_exclude_top);
    e.get("trials", cfg.baseline_trials);
    e.get("set_size", cfg.baseline_set_size);
    e.get("oov_policy", cfg.oov_policy);
    e.get("threshold", cfg.match_threshold);
    e.finish();
    parse_oov_policy(cfg.oov_policy);
  }
  if (const auto* node = r.child("generation")) read_generation(*node, cfg);
  if (const auto* node = r.child("llm")) read_llm(*node, cfg);
  if (const auto* node = r.child("topics")) {
    ConfigReader t(*node, "topics");
    t.get("k", cfg.lda.topics);
    t.get("alpha", cfg.lda.alpha);
    t.get("beta", cfg.lda.beta);
    t.get("iterations", cfg.lda.iterations);
    t.get("burn_in", cfg.lda.burn_in);
    t.get("samples", cfg.lda.samples);
    t.get("n_keywords", cfg.n_keywords);
    t.get("min_df", cfg.min_df);
    std::string mapping;
    t.get("mapping", mapping);
    cfg.topic_mapping = resolve(base, mapping);
    t.finish();
  }
  if (const auto* node = r.child("logodds")) {
    ConfigReader l(*node, "logodds");
    l.get("prior", cfg.prior);
    if (cfg.prior != "uniform") cfg.prior = resolve(base, cfg.prior).string();
    l.get("scale", cfg.prior_scale);
    l.get("top_k", cfg.top_k);
    l.finish();
  }
  if (const auto* node = r.child("bootstrap")) {
    ConfigReader b(*node, "bootstrap");
    b.get("replicates", cfg.bootstrap_replicates);
    b.finish();
  }
  if (const auto* node = r.child("pairs")) {
    if (!node->is_array()) throw ConfigError("config.pairs must be an array");
    for (const auto& p : *node) {
      ConfigReader pr(p, "pairs[]");
      GroupPair pair;
      pr.get("a", pair.group_a);
      pr.get("b", pair.group_b);
      pr.finish();
      ProfileFilter::parse(pair.group_a);
      ProfileFilter::parse(pair.group_b);
      cfg.pairs.push_back(std::move(pair));
    }
  }
  r.finish();
  return cfg;
}

namespace {

// ---------------------------------------------------------------------------
// Output helpers

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("error writing " + path.string());
}

// Paths under the output directory are recorded relative to it so reruns
// into different directories produce identical metadata.
std::string display_path(const fs::path& p, const fs::path& out_dir) {
  if (p.empty()) return {};
  const auto abs = fs::weakly_canonical(fs::absolute(p));
  const auto out = fs::weakly_canonical(fs::absolute(out_dir));
  auto rel = abs.lexically_relative(out);
  if (!rel.empty() && *rel.begin() != "..") return "$OUT/" + rel.generic_string();
  return abs.generic_string();
}

std::string slug(const std::string& label) {
  std::string out;
  for (char c : label) {
    if (c == '=') out.push_back('-');
    else if (c == ',') out.push_back('+');
    else out.push_back(c);
  }
  return out;
}

std::string pair_slug(const ProfileFilter& a, const ProfileFilter& b) { return slug(a.label()) + "_vs_" + slug(b.label()); }

ojson config_snapshot(const RunConfig& cfg) {
  const auto& out = cfg.out_dir;
  ojson j;
  j["seed"] = cfg.seed;
  j["mock"] = cfg.mock;
  auto corpora = ojson::array();
  for (const auto& p : cfg.corpus_paths) corpora.push_back(display_path(p, out));
  j["corpus"] = corpora;
  j["lexicon"] = display_path(cfg.lexicon, out);
  j["embeddings"] = {{"path", display_path(cfg.embeddings, out)},
                     {"dimension", cfg.embedding_dimension},
                     {"exclude_top", cfg.baseline_exclude_top},
                     {"trials", cfg.baseline_trials},
                     {"set_size", cfg.baseline_set_size},
                     {"oov_policy", cfg.oov_policy},
                     {"threshold", cfg.match_threshold}};
  ojson gen;
  gen["races"] = ojson::array();
  for (auto r : cfg.plan.races) gen["races"].push_back(to_string(r));
  gen["genders"] = ojson::array();
  for (auto g : cfg.plan.genders) gen["genders"].push_back(to_string(g));
  gen["contexts"] = ojson::array();
  for (const auto& c : cfg.plan.contexts)
    gen["contexts"].push_back({{"context", to_string(c.context)},
                               {"count_pre", c.count_pre},
                               {"count_post", c.count_post},
                               {"template", c.prompt.text},
                               {"context_clause", c.prompt.context_clause},
                               {"year_clause", c.prompt.year_clause},
                               {"article_correction", c.prompt.article_correction}});
  gen["post_years"] = cfg.plan.post_years;
  gen["temperature"] = cfg.plan.sampling.temperature;
  gen["max_tokens"] = cfg.plan.sampling.max_tokens;
  j["generation"] = gen;
  j["llm"] = {{"endpoint", cfg.llm.endpoint},
              {"model", cfg.llm.model},
              {"api_key_env", cfg.llm.api_key_env},
              {"style", cfg.llm.style == ApiStyle::Chat ? "chat" : "completions"},
              {"max_concurrent", cfg.llm.max_concurrent},
              {"max_attempts", cfg.llm.retry.max_attempts},
              {"backoff_ms", cfg.llm.retry.initial_backoff.count()},
              {"timeout_s", cfg.llm.timeout_seconds}};
  j["topics"] = {{"k", cfg.lda.topics},
                 {"alpha", cfg.lda.alpha ? ojson(*cfg.lda.alpha) : ojson(nullptr)},
                 {"beta", cfg.lda.beta},
                 {"iterations", cfg.lda.iterations},
                 {"burn_in", cfg.lda.burn_in},
                 {"samples", cfg.lda.samples},
                 {"n_keywords", cfg.n_keywords},
                 {"min_df", cfg.min_df},
                 {"mapping", display_path(cfg.topic_mapping, out)}};
  j["logodds"] = {{"prior", cfg.prior == "uniform" ? cfg.prior : display_path(cfg.prior, out)},
                  {"scale", cfg.prior_scale},
                  {"top_k", cfg.top_k}};
  j["bootstrap"] = {{"replicates", cfg.bootstrap_replicates}};
  j["pairs"] = ojson::array();
  for (const auto& p : cfg.pairs) j["pairs"].push_back({{"a", p.group_a}, {"b", p.group_b}});
  return j;
}

void write_metadata(const RunConfig& cfg, const std::string& command, const ojson& extra = ojson::object()) {
  ojson j;
  j["command"] = command;
  j["version"] = kVersion;
  j["seed"] = cfg.seed;
  j["config"] = config_snapshot(cfg);
  if (!extra.empty()) j["details"] = extra;
  write_file(cfg.out_dir / ("run_metadata_" + command + ".json"), j.dump(2) + "\n");
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path is not configured");
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " " + path.string() + " does not exist");
}

Corpus load_analysis_corpus(const RunConfig& cfg) {
  auto paths = cfg.corpus_paths;
  if (paths.empty()) paths.push_back(cfg.out_dir / "corpus.jsonl");
  for (const auto& p : paths) require_file(p, "corpus");
  if (paths.size() == 1) return load_corpus(paths.front());
  std::vector<Document> docs;
  std::string provenance;
  for (const auto& p : paths) {
    auto part = load_corpus(p);
    docs.insert(docs.end(), part.begin(), part.end());
    provenance += (provenance.empty() ? "" : ";") + part.provenance();
  }
  return Corpus(std::move(docs), provenance);
}

std::vector<GroupPair> effective_pairs(const RunConfig& cfg) {
  if (!cfg.pairs.empty()) return cfg.pairs;
  return {{"gender=woman", "gender=man"}};
}

// ---------------------------------------------------------------------------
// Commands

int cmd_generate(const RunConfig& cfg, bool allow_partial, std::ostream& out, std::ostream& err) {
  const auto jobs = expand_plan(cfg.plan);

  std::unique_ptr<LlmClient> client;
  if (cfg.mock)
    client = std::make_unique<MockClient>(cfg.seed);
  else
    client = std::make_unique<HttpLlmClient>(cfg.llm);  // throws before any output without an API key

  GenerateOptions options;
  options.max_concurrent = cfg.mock ? 1 : cfg.llm.max_concurrent;
  options.retry = cfg.llm.retry;
  const auto provenance =
      fmt::format("synthgen client={} temperature={} max_tokens={} seed={}", client->describe(),
                  cfg.plan.sampling.temperature, cfg.plan.sampling.max_tokens, cfg.seed);

  fs::create_directories(cfg.out_dir);
  const auto result = generate(jobs, *client, options, provenance);
  save_corpus(result.corpus, cfg.out_dir / "corpus.jsonl", CorpusFormat::Jsonl);

  const auto& rep = result.report;
  ojson report;
  report["provenance"] = provenance;
  report["requested"] = rep.requested;
  report["succeeded"] = rep.succeeded;
  report["failed"] = rep.failed;
  auto cells = ojson::array();
  for (const auto& [key, outcome] : rep.cells) {
    const auto& [race, gender, context, phase, year] = key;
    cells.push_back({{"race", to_string(race)},
                     {"gender", to_string(gender)},
                     {"context", to_string(context)},
                     {"phase", to_string(phase)},
                     {"year", year == 0 ? ojson(nullptr) : ojson(year)},
                     {"succeeded", outcome.succeeded},
                     {"failed", outcome.failed}});
  }
  report["cells"] = cells;
  auto failures = ojson::array();
  for (const auto& f : rep.failures)
    failures.push_back({{"job", f.job_id}, {"attempts", f.attempts}, {"error", f.error}});
  report["failures"] = failures;
  write_file(cfg.out_dir / "generation_report.json", report.dump(2) + "\n");
  write_metadata(cfg, "generate");

  out << fmt::format("generated {}/{} documents -> {}\n", rep.succeeded, rep.requested,
                     (cfg.out_dir / "corpus.jsonl").string());
  if (rep.failed > 0) {
    err << fmt::format("warning: {} jobs failed after retries (see generation_report.json)\n", rep.failed);
    if (!allow_partial) return kExitUpstream;
  }
  return kExitOk;
}

int cmd_stats(const RunConfig& cfg, std::ostream& out) {
  const auto corpus = load_analysis_corpus(cfg);
  const auto stats = corpus_stats(corpus);
  fs::create_directories(cfg.out_dir);

  ojson j;
  j["total"] = stats.total;
  auto margin = [](const auto& m) {
    ojson o;
    for (const auto& [k, v] : m) o[std::string(to_string(k))] = v;
    return o;
  };
  j["race"] = margin(stats.race);
  j["gender"] = margin(stats.gender);
  j["context"] = margin(stats.context);
  j["phase"] = margin(stats.phase);
  auto cells = ojson::array();
  for (const auto& [key, count] : stats.cells) {
    const auto& [race, gender, context, phase] = key;
    cells.push_back({{"race", to_string(race)},
                     {"gender", to_string(gender)},
                     {"context", to_string(context)},
                     {"phase", to_string(phase)},
                     {"count", count}});
  }
  j["cells"] = cells;
  write_file(cfg.out_dir / "stats.json", j.dump(2) + "\n");

  std::ostringstream csv_out;
  csv_out << "dimension,value,count\n";
  auto emit = [&](const char* dim, const auto& m) {
    for (const auto& [k, v] : m) csv_out << dim << ',' << csv::escape(to_string(k)) << ',' << v << '\n';
  };
  emit("race", stats.race);
  emit("gender", stats.gender);
  emit("context", stats.context);
  emit("phase", stats.phase);
  csv_out << "total,all," << stats.total << '\n';
  write_file(cfg.out_dir / "stats.csv", csv_out.str());
  write_metadata(cfg, "stats");

  out << fmt::format("{} documents\n", stats.total);
  for (const auto& [race, count] : stats.race)
    if (count) out << fmt::format("  race {:<18} {}\n", to_string(race), count);
  for (const auto& [gender, count] : stats.gender)
    if (count) out << fmt::format("  gender {:<16} {}\n", to_string(gender), count);
  for (const auto& [phase, count] : stats.phase) out << fmt::format("  phase {:<17} {}\n", to_string(phase), count);
  return kExitOk;
}

int cmd_logodds(const RunConfig& cfg, const GroupPair& pair, std::ostream& out, std::ostream& err) {
  require_file(cfg.lexicon, "lexicon");
  const auto lexicon = parse_lexicon(cfg.lexicon);
  const auto corpus = load_analysis_corpus(cfg);
  const auto filter_a = ProfileFilter::parse(pair.group_a);
  const auto filter_b = ProfileFilter::parse(pair.group_b);
  const auto corpus_a = filter_corpus(corpus, filter_a);
  const auto corpus_b = filter_corpus(corpus, filter_b);
  if (corpus_a.empty()) throw DataError("group '" + filter_a.label() + "' matches no documents");
  if (corpus_b.empty()) throw DataError("group '" + filter_b.label() + "' matches no documents");

  const auto counts_a = count_categories(lexicon, corpus_a, cfg.threads);
  const auto counts_b = count_categories(lexicon, corpus_b, cfg.threads);

  PriorVector prior;
  std::string prior_source;
  if (cfg.prior == "uniform") {
    prior = uniform_prior(counts_a.names, cfg.prior_scale);
    prior_source = "uniform";
  } else {
    require_file(cfg.prior, "prior counts");
    prior = prior_from_counts(align_counts(read_counts_csv(cfg.prior), counts_a.names), cfg.prior_scale);
    prior_source = display_path(cfg.prior, cfg.out_dir);
  }
  const auto result = log_odds(counts_a, counts_b, prior);

  fs::create_directories(cfg.out_dir);
  const auto name = pair_slug(filter_a, filter_b);
  std::ostringstream csv_out;
  write_log_odds_csv(filter_a.label(), filter_b.label(), result, csv_out);
  write_file(cfg.out_dir / ("logodds_" + name + ".csv"), csv_out.str());

  for (const auto& [filter, counts] : {std::pair{&filter_a, &counts_a}, std::pair{&filter_b, &counts_b}}) {
    std::ostringstream c;
    write_counts_csv(*counts, c);
    write_file(cfg.out_dir / ("counts_" + slug(filter->label()) + ".csv"), c.str());
  }

  for (int k : cfg.top_k) {
    const auto pos = top_k(result, k, Direction::Positive);
    const auto neg = top_k(result, k, Direction::Negative);
    if (pos.clamped) err << fmt::format("warning: k={} exceeds {} categories; clamped\n", k, result.categories.size());
    std::ostringstream t;
    t << "rank,positive_category,positive_delta,negative_category,negative_delta\n";
    for (std::size_t i = 0; i < pos.entries.size(); ++i)
      t << i + 1 << ',' << csv::escape(pos.entries[i].first) << ',' << fmt::format("{}", pos.entries[i].second) << ','
        << csv::escape(neg.entries[i].first) << ',' << fmt::format("{}", neg.entries[i].second) << '\n';
    write_file(cfg.out_dir / fmt::format("topk_{}_k{}.csv", name, k), t.str());
  }

  ojson meta;
  meta["group_i"] = filter_a.label();
  meta["group_j"] = filter_b.label();
  meta["documents_i"] = corpus_a.size();
  meta["documents_j"] = corpus_b.size();
  meta["category_incidences_i"] = counts_a.sum();
  meta["category_incidences_j"] = counts_b.sum();
  meta["tokens_i"] = counts_a.total_tokens;
  meta["tokens_j"] = counts_b.total_tokens;
  meta["prior"] = {{"source", prior_source}, {"scale", cfg.prior_scale}, {"epsilon", kPriorEpsilon},
                   {"alpha0", prior.alpha0}};
  meta["lexicon"] = {{"path", display_path(cfg.lexicon, cfg.out_dir)},
                     {"categories", lexicon.categories().size()},
                     {"entries", lexicon.entries().size()},
                     {"skipped_multiword", lexicon.skipped_multiword()}};
  meta["ranking"] = "delta";
  write_file(cfg.out_dir / ("logodds_" + name + ".meta.json"), meta.dump(2) + "\n");
  write_metadata(cfg, "logodds", {{"group_a", pair.group_a}, {"group_b", pair.group_b}});

  const auto pos = top_k(result, 5, Direction::Positive);
  const auto neg = top_k(result, 5, Direction::Negative);
  out << fmt::format("{} (+) vs {} (-)\n", filter_a.label(), filter_b.label());
  for (std::size_t i = 0; i < pos.entries.size(); ++i)
    out << fmt::format("  {:<14} {:>7.2f}   {:<14} {:>7.2f}\n", pos.entries[i].first, pos.entries[i].second,
                       neg.entries[i].first, neg.entries[i].second);
  return kExitOk;
}

std::string topic_label(const TopicMapping* mapping, std::size_t topic) {
  if (mapping) {
    if (auto it = mapping->fine_labels.find(topic); it != mapping->fine_labels.end()) return it->second;
    if (auto it = mapping->labels.find(topic); it != mapping->labels.end() && it->second) return *it->second;
  }
  return "topic-" + std::to_string(topic);
}

std::optional<TopicMapping> configured_mapping(const RunConfig& cfg) {
  if (cfg.topic_mapping.empty()) return std::nullopt;
  require_file(cfg.topic_mapping, "topic mapping");
  return read_topic_mapping(cfg.topic_mapping);
}

int cmd_topics(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto corpus = load_analysis_corpus(cfg);
  const auto mapping = configured_mapping(cfg);
  const auto built = build_matrix(corpus, cfg.min_df);
  if (built.matrix.dropped_documents > 0)
    err << fmt::format("warning: {} documents had no terms left after filtering and were dropped\n",
                       built.matrix.dropped_documents);

  auto options = cfg.lda;
  options.seed = cfg.seed;
  const auto model = fit_lda(built, options);

  fs::create_directories(cfg.out_dir);
  save_model(model, cfg.out_dir / "topic_model.json");
  std::ostringstream kw;
  kw << "topic,label,keywords\n";
  for (std::size_t k = 0; k < model.topics; ++k) {
    const auto set = top_keywords(model, k, cfg.n_keywords);
    std::string joined;
    for (const auto& w : set.keywords) joined += (joined.empty() ? "" : " ") + w;
    kw << k << ',' << csv::escape(topic_label(mapping ? &*mapping : nullptr, k)) << ',' << csv::escape(joined) << '\n';
  }
  write_file(cfg.out_dir / "topic_keywords.csv", kw.str());
  write_metadata(cfg, "topics",
                 {{"documents", built.matrix.size()},
                  {"dropped_documents", built.matrix.dropped_documents},
                  {"vocabulary", built.vocabulary.size()},
                  {"alpha", model.alpha}});

  out << fmt::format("fitted K={} on {} documents, V={} ({} iterations)\n", model.topics, built.matrix.size(),
                     built.vocabulary.size(), model.iterations);
  if (!model.loglik.empty())
    out << fmt::format("  log-likelihood {} -> {}\n", model.loglik.front().second, model.loglik.back().second);
  for (std::size_t k = 0; k < model.topics; ++k) {
    const auto set = top_keywords(model, k, 8);
    std::string joined;
    for (const auto& w : set.keywords) joined += " " + w;
    out << fmt::format("  {:>2}:{}\n", k, joined);
  }
  return kExitOk;
}

int cmd_prevalence(const RunConfig& cfg, const GroupPair& pair, const fs::path& model_path, std::ostream& out) {
  const auto path = model_path.empty() ? cfg.out_dir / "topic_model.json" : model_path;
  require_file(path, "topic model");
  const auto model = load_model(path);
  const auto corpus = load_analysis_corpus(cfg);
  const auto mapping = configured_mapping(cfg);

  std::unordered_map<std::string, const DemographicProfile*> by_id;
  for (const auto& doc : corpus) by_id.emplace(doc.id, &doc.profile);
  std::vector<DemographicProfile> profiles;
  profiles.reserve(model.doc_ids.size());
  for (const auto& id : model.doc_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("document '" + id + "' of the topic model is not in the corpus");
    profiles.push_back(*it->second);
  }

  const auto filter_a = ProfileFilter::parse(pair.group_a);
  const auto filter_b = ProfileFilter::parse(pair.group_b);
  PrevalenceOptions options;
  options.replicates = cfg.bootstrap_replicates;
  options.seed = cfg.seed;
  options.threads = cfg.threads;

  std::vector<std::string> labels;
  for (std::size_t k = 0; k < model.topics; ++k) labels.push_back(topic_label(mapping ? &*mapping : nullptr, k));
  const auto estimates = prevalence_diff(model.theta, profiles, filter_a, filter_b, options, labels);

  fs::create_directories(cfg.out_dir);
  const auto name = pair_slug(filter_a, filter_b);
  std::ostringstream csv_out;
  write_prevalence_csv(estimates, csv_out);
  write_file(cfg.out_dir / ("prevalence_" + name + ".csv"), csv_out.str());

  if (mapping) {
    const auto merged = consolidate(model.theta, *mapping);
    const auto overarching = prevalence_diff(merged.proportions, profiles, filter_a, filter_b, options, merged.labels);
    std::ostringstream o;
    write_prevalence_csv(overarching, o);
    write_file(cfg.out_dir / ("prevalence_overarching_" + name + ".csv"), o.str());
  }
  write_metadata(cfg, "prevalence",
                 {{"group_a", pair.group_a}, {"group_b", pair.group_b}, {"model", display_path(path, cfg.out_dir)}});

  out << fmt::format("{} vs {} ({} bootstrap replicates)\n", filter_a.label(), filter_b.label(), options.replicates);
  for (const auto& e : estimates)
    out << fmt::format("  {:<28} {:+.4f} [{:+.4f}, {:+.4f}]{}\n", e.label, e.mean_diff, e.ci_low, e.ci_high,
                       (e.ci_low > 0.0 || e.ci_high < 0.0) ? " *" : "");
  return kExitOk;
}

int cmd_similarity(const RunConfig& cfg, const fs::path& keywords_a, const fs::path& keywords_b, std::ostream& out) {
  require_file(cfg.embeddings, "embeddings");
  require_file(keywords_a, "keyword file A");
  require_file(keywords_b, "keyword file B");
  const auto policy = parse_oov_policy(cfg.oov_policy);
  const auto table = load_embeddings(cfg.embeddings, cfg.embedding_dimension);
  const auto sets_a = read_keyword_file(keywords_a);
  const auto sets_b = read_keyword_file(keywords_b);

  std::optional<SurfaceForms> surface;
  if (policy == OovPolicy::BackoffUnstem) surface = SurfaceForms::from_corpus(load_analysis_corpus(cfg));

  auto report = match_topics(table, sets_a, sets_b, cfg.match_threshold, policy, surface ? &*surface : nullptr);
  if (cfg.baseline_trials > 0) {
    BaselineOptions b;
    b.set_size = cfg.baseline_set_size;
    b.trials = cfg.baseline_trials;
    b.seed = cfg.seed;
    b.exclude_top = cfg.baseline_exclude_top;
    report.baseline = random_baseline(table, b);
  }

  fs::create_directories(cfg.out_dir);
  std::ostringstream csv_out;
  write_similarity_csv(report, csv_out);
  write_file(cfg.out_dir / "similarity.csv", csv_out.str());
  write_file(cfg.out_dir / "similarity_summary.json", similarity_summary_json(report) + "\n");
  write_metadata(cfg, "similarity",
                 {{"keywords_a", display_path(keywords_a, cfg.out_dir)},
                  {"keywords_b", display_path(keywords_b, cfg.out_dir)},
                  {"embedding_rows", table.size()},
                  {"rejected_rows", table.rejected_rows}});

  for (const auto& p : report.pairs) out << fmt::format("  {:<28} {:.4f}\n", p.label, p.cosine);
  for (const auto& u : report.unmatched_a) out << fmt::format("  unmatched (A) {}\n", u);
  for (const auto& u : report.unmatched_b) out << fmt::format("  unmatched (B) {}\n", u);
  if (report.baseline)
    out << fmt::format("  random baseline {:.4f} (sd {:.4f}, {} trials)\n", report.baseline->mean, report.baseline->sd,
                       report.baseline->trials);
  return kExitOk;
}

int cmd_kappa(const RunConfig& cfg, const fs::path& matrix_path, std::ostream& out) {
  require_file(matrix_path, "annotation matrix");
  const auto matrix = read_annotation_csv(matrix_path);
  const auto result = fleiss_kappa(matrix);
  fs::create_directories(cfg.out_dir);
  ojson j;
  j["kappa"] = result.kappa;
  j["observed_agreement"] = result.observed;
  j["expected_agreement"] = result.expected;
  j["degenerate"] = result.degenerate;
  j["items"] = matrix.rows.size();
  j["raters"] = matrix.raters();
  j["labels"] = matrix.labels;
  write_file(cfg.out_dir / "kappa.json", j.dump(2) + "\n");
  out << fmt::format("kappa={:.4f}{}\n", result.kappa, result.degenerate ? " (degenerate: one label everywhere)" : "");
  return kExitOk;
}

int cmd_report(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  cmd_stats(cfg, out);
  const bool with_lexicon = !cfg.lexicon.empty();
  if (with_lexicon)
    for (const auto& pair : effective_pairs(cfg)) cmd_logodds(cfg, pair, out, err);
  else
    err << "warning: no lexicon configured; skipping log-odds\n";
  cmd_topics(cfg, out, err);
  for (const auto& pair : effective_pairs(cfg)) cmd_prevalence(cfg, pair, {}, out);

  ojson index;
  index["version"] = kVersion;
  index["seed"] = cfg.seed;
  auto files = ojson::array();
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(cfg.out_dir))
    if (entry.is_regular_file() && entry.path().filename() != "report.json")
      names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  for (const auto& n : names) files.push_back(n);
  index["outputs"] = files;
  write_file(cfg.out_dir / "report.json", index.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"headroom: synthetic depression-narrative corpora and fidelity analyses"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool mock = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "Seed for generation, topic model, bootstrap and baseline");
  app.add_option("--out", out_dir, "Output directory");
  app.add_flag("--mock", mock, "Use the deterministic offline generator instead of the LLM endpoint");

  std::vector<std::string> corpus_override;
  auto add_corpus = [&](CLI::App* sub) { sub->add_option("--corpus", corpus_override, "Corpus file(s), JSONL or CSV"); };

  auto* generate_cmd = app.add_subcommand("generate", "Generate a synthetic corpus from the configured plan");
  bool allow_partial = false;
  generate_cmd->add_flag("--allow-partial", allow_partial, "Exit 0 even when some jobs failed");

  auto* stats_cmd = app.add_subcommand("stats", "Demographic cell counts of a corpus");
  add_corpus(stats_cmd);

  GroupPair pair;
  std::string lexicon_override, prior_override;
  std::optional<double> scale_override;
  auto* logodds_cmd = app.add_subcommand("logodds", "Lexicon log-odds ratios between two groups");
  add_corpus(logodds_cmd);
  logodds_cmd->add_option("--group-a", pair.group_a, "Filter such as gender=woman");
  logodds_cmd->add_option("--group-b", pair.group_b, "Filter such as gender=man");
  logodds_cmd->add_option("--lexicon", lexicon_override, "LIWC-format .dic file");
  logodds_cmd->add_option("--prior", prior_override, "'uniform' or a category,count CSV of reference counts");
  logodds_cmd->add_option("--scale", scale_override, "Prior concentration alpha0");

  std::optional<std::size_t> topics_override, iterations_override;
  std::string mapping_override;
  auto* topics_cmd = app.add_subcommand("topics", "Fit the topic model and export keywords");
  add_corpus(topics_cmd);
  topics_cmd->add_option("-k,--topics", topics_override, "Number of topics");
  topics_cmd->add_option("--iterations", iterations_override, "Gibbs iterations");
  topics_cmd->add_option("--mapping", mapping_override, "Topic mapping CSV");

  std::string model_path;
  std::optional<std::size_t> replicates_override;
  auto* prevalence_cmd = app.add_subcommand("prevalence", "Topic prevalence differences between two groups");
  add_corpus(prevalence_cmd);
  prevalence_cmd->add_option("--group-a", pair.group_a, "Filter such as race=asian");
  prevalence_cmd->add_option("--group-b", pair.group_b, "Filter such as race=white");
  prevalence_cmd->add_option("--model", model_path, "Topic model file (default OUT/topic_model.json)");
  prevalence_cmd->add_option("--mapping", mapping_override, "Topic mapping CSV");
  prevalence_cmd->add_option("--replicates", replicates_override, "Bootstrap replicates");

  std::string keywords_a, keywords_b, embeddings_override;
  std::optional<std::size_t> dimension_override, trials_override;
  std::string oov_override;
  std::optional<double> threshold_override;
  auto* similarity_cmd = app.add_subcommand("similarity", "Embedding similarity between two sets of topic keywords");
  similarity_cmd->add_option("keywords_a", keywords_a, "Keyword CSV (label,keywords)")->required();
  similarity_cmd->add_option("keywords_b", keywords_b, "Keyword CSV (label,keywords)")->required();
  similarity_cmd->add_option("--embeddings", embeddings_override, "GloVe text file");
  similarity_cmd->add_option("--dim", dimension_override, "Embedding dimension");
  similarity_cmd->add_option("--baseline-trials", trials_override, "Random-baseline trials (0 disables)");
  similarity_cmd->add_option("--oov", oov_override, "skip | backoff-unstem | error");
  similarity_cmd->add_option("--threshold", threshold_override, "Minimum cosine for a match");
  add_corpus(similarity_cmd);

  std::string matrix_path;
  auto* kappa_cmd = app.add_subcommand("kappa", "Fleiss' kappa of an annotation count matrix");
  kappa_cmd->add_option("matrix", matrix_path, "CSV: item,label1,label2,...")->required();

  auto* report_cmd = app.add_subcommand("report", "stats, logodds, topics and prevalence for the configured pairs");
  add_corpus(report_cmd);

  std::vector<const char*> argv;
  argv.push_back("headroom");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::Success&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (mock) cfg.mock = true;
    if (!corpus_override.empty()) {
      cfg.corpus_paths.clear();
      for (const auto& p : corpus_override) cfg.corpus_paths.emplace_back(p);
    }
    if (!lexicon_override.empty()) cfg.lexicon = lexicon_override;
    if (!prior_override.empty()) cfg.prior = prior_override;
    if (scale_override) cfg.prior_scale = *scale_override;
    if (topics_override) cfg.lda.topics = *topics_override;
    if (iterations_override) cfg.lda.iterations = *iterations_override;
    if (!mapping_override.empty()) cfg.topic_mapping = mapping_override;
    if (replicates_override) cfg.bootstrap_replicates = *replicates_override;
    if (!embeddings_override.empty()) cfg.embeddings = embeddings_override;
    if (dimension_override) cfg.embedding_dimension = *dimension_override;
    if (trials_override) cfg.baseline_trials = *trials_override;
    if (!oov_override.empty()) cfg.oov_policy = oov_override;
    if (threshold_override) cfg.match_threshold = *threshold_override;

    auto resolve_pair = [&]() {
      auto p = effective_pairs(cfg).front();
      if (!pair.group_a.empty()) p.group_a = pair.group_a;
      if (!pair.group_b.empty()) p.group_b = pair.group_b;
      return p;
    };

    if (app.got_subcommand(generate_cmd)) return cmd_generate(cfg, allow_partial, out, err);
    if (app.got_subcommand(stats_cmd)) return cmd_stats(cfg, out);
    if (app.got_subcommand(logodds_cmd)) return cmd_logodds(cfg, resolve_pair(), out, err);
    if (app.got_subcommand(topics_cmd)) return cmd_topics(cfg, out, err);
    if (app.got_subcommand(prevalence_cmd)) return cmd_prevalence(cfg, resolve_pair(), model_path, out);
    if (app.got_subcommand(similarity_cmd)) return cmd_similarity(cfg, keywords_a, keywords_b, out);
    if (app.got_subcommand(kappa_cmd)) return cmd_kappa(cfg, matrix_path, out);
    if (app.got_subcommand(report_cmd)) return cmd_report(cfg, out, err);
    err << "error: no command given\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UpstreamError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUpstream;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace headroom
