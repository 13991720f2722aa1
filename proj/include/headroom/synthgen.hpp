#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "headroom/corpus.hpp"
#include "headroom/error.hpp"

namespace headroom {

// Default prompt pieces. The persona sentence renders "a Asian" as is;
// PromptTemplate::article_correction fixes the article.
inline constexpr const char* kPersonaTemplate =
    "I want you to act like a {race} {gender} who is feeling depressed. {context_clause}";
inline constexpr const char* kBlogClause = "Write a blog post to describe the main source of stress in your life";
inline constexpr const char* kRedditClause =
    "Write a Reddit post on r/Depression to describe the main source of stress in your life";
inline constexpr const char* kTherapyClause =
    "You are talking to your therapist. Describe the main source of stress in your life";
inline constexpr const char* kYearClause = "It is the year {year}, during the COVID-19 pandemic.";

// Slots: {race}, {gender}, {context_clause}, {year} and {year_clause}.
// When the text has no {year_clause} slot the rendered year clause is
// appended as a separate sentence for post-COVID profiles.
struct PromptTemplate {
  std::string text = kPersonaTemplate;
  std::string context_clause;
  std::string year_clause = kYearClause;
  // Turns "a Asian" into "an Asian". Off by default.
  bool article_correction = false;
};

std::string render_prompt(const PromptTemplate& tmpl, const DemographicProfile& profile);

struct ContextPlan {
  Context context = Context::BlogPost;
  PromptTemplate prompt;
  int count_pre = 0;   // per (race, gender)
  int count_post = 0;  // per (race, gender), spread over post_years
};

struct SamplingParams {
  double temperature = 1.0;
  int max_tokens = 256;
  std::optional<std::int64_t> seed;
};

struct GenerationPlan {
  std::vector<Race> races;
  std::vector<Gender> genders;
  std::vector<ContextPlan> contexts;
  std::vector<int> post_years = {2020, 2021};
  SamplingParams sampling;

  // Throws ConfigError on negative counts or an empty year list with post counts.
  void validate() const;
  std::size_t total() const;
};

// 4 races x 2 genders; blog 30 pre + 60 post per cell; Reddit and therapy
// 150 per cell each, half pre and half post.
GenerationPlan reference_plan();

std::string default_context_clause(Context context);

struct PromptJob {
  std::size_t index = 0;
  std::string id;  // also the document id, "hr-00042"
  DemographicProfile profile;
  std::string rendered_prompt;
  SamplingParams sampling;
};

// Order: context, race, gender, phase, year, replicate.
std::vector<PromptJob> expand_plan(const GenerationPlan& plan);

// Deterministic pseudo-text for offline runs. Embeds marker tokens
// ("mkasian", "mkwoman", ...) and demographic-skewed stressor vocabulary so
// downstream analyses have known group differences.
std::string mock_generate(const PromptJob& job, std::uint64_t seed);

// Retriable failure (timeouts, 429, 5xx).
class TransientError : public UpstreamError {
 public:
  using UpstreamError::UpstreamError;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Returns the completion text. Throws AuthError (abort the run),
  // TransientError (retry) or UpstreamError (give up on this job).
  virtual std::string complete(const PromptJob& job) = 0;
  virtual std::string describe() const = 0;
};

class MockClient final : public LlmClient {
 public:
  explicit MockClient(std::uint64_t seed) : seed_(seed) {}
  std::string complete(const PromptJob& job) override { return mock_generate(job, seed_); }
  std::string describe() const override { return "mock(seed=" + std::to_string(seed_) + ")"; }

 private:
  std::uint64_t seed_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_multiplier = 2.0;
};

struct GenerateOptions {
  int max_concurrent = 1;
  RetryPolicy retry;
};

using CellKey = std::tuple<Race, Gender, Context, Phase, int>;  // year 0 for pre-COVID

struct CellOutcome {
  std::size_t succeeded = 0;
  std::size_t failed = 0;
};

struct JobFailure {
  std::string job_id;
  int attempts = 0;
  std::string error;
};

struct GenerationReport {
  std::size_t requested = 0;
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::map<CellKey, CellOutcome> cells;
  std::vector<JobFailure> failures;
};

struct GenerationResult {
  Corpus corpus;
  GenerationReport report;
};

// Runs every job through the client, retrying transient failures. Output
// order is job order regardless of concurrency. AuthError aborts the run
// and propagates.
GenerationResult generate(const std::vector<PromptJob>& jobs, LlmClient& client,
                          const GenerateOptions& options = {}, const std::string& provenance = {});

}  // namespace headroom
