#include <doctest.h>

#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "headroom/synthgen.hpp"

using namespace headroom;

namespace {

std::size_t count_if_profile(const std::vector<PromptJob>& jobs, auto pred) {
  std::size_t n = 0;
  for (const auto& j : jobs) n += pred(j.profile) ? 1 : 0;
  return n;
}

GenerateOptions fast_options(int concurrency = 1, int attempts = 3) {
  GenerateOptions o;
  o.max_concurrent = concurrency;
  o.retry.max_attempts = attempts;
  o.retry.initial_backoff = std::chrono::milliseconds(1);
  return o;
}

GenerationPlan tiny_plan() {
  auto plan = reference_plan();
  for (auto& c : plan.contexts) {
    c.count_pre = 2;
    c.count_post = 3;
  }
  return plan;
}

// Fails the first `failures` calls of every job with a transient error.
class FlakyClient : public LlmClient {
 public:
  explicit FlakyClient(int failures) : failures_(failures) {}
  std::string complete(const PromptJob& job) override {
    std::lock_guard lock(mu_);
    if (calls_[job.id]++ < failures_) throw TransientError("503");
    return "text for " + job.id;
  }
  std::string describe() const override { return "flaky"; }
  std::map<std::string, int> calls_;

 private:
  int failures_;
  std::mutex mu_;
};

class AuthFailClient : public LlmClient {
 public:
  std::string complete(const PromptJob&) override { throw AuthError("401"); }
  std::string describe() const override { return "auth-fail"; }
};

class PermanentFailClient : public LlmClient {
 public:
  std::string complete(const PromptJob& job) override {
    if (job.index % 5 == 0) throw UpstreamError("400 bad request");
    return "ok " + job.id;
  }
  std::string describe() const override { return "permanent"; }
};

// Sleeps inversely to job index so completions finish out of order.
class SlowClient : public LlmClient {
 public:
  std::string complete(const PromptJob& job) override {
    std::this_thread::sleep_for(std::chrono::microseconds(50 * (job.index % 7)));
    ++in_flight_total_;
    return "slow " + job.id;
  }
  std::string describe() const override { return "slow"; }
  std::atomic<int> in_flight_total_{0};
};

}  // namespace

TEST_CASE("reference plan margins are exact") {
  const auto jobs = expand_plan(reference_plan());
  CHECK(jobs.size() == 3120);
  CHECK(reference_plan().total() == 3120);
  for (auto race : {Race::Asian, Race::AfricanAmerican, Race::Hispanic, Race::White})
    CHECK(count_if_profile(jobs, [race](const auto& p) { return p.race == race; }) == 780);
  for (auto gender : {Gender::Woman, Gender::Man})
    CHECK(count_if_profile(jobs, [gender](const auto& p) { return p.gender == gender; }) == 1560);
  CHECK(count_if_profile(jobs, [](const auto& p) { return p.phase == Phase::PreCovid; }) == 1440);
  CHECK(count_if_profile(jobs, [](const auto& p) { return p.phase == Phase::PostCovid; }) == 1680);
  CHECK(count_if_profile(jobs, [](const auto& p) { return p.context == Context::BlogPost; }) == 720);
  CHECK(count_if_profile(jobs, [](const auto& p) {
          return p.context == Context::BlogPost && p.race == Race::Asian && p.gender == Gender::Woman &&
                 p.phase == Phase::PreCovid;
        }) == 30);
  CHECK(count_if_profile(jobs, [](const auto& p) { return p.year == 2020; }) +
            count_if_profile(jobs, [](const auto& p) { return p.year == 2021; }) ==
        1680);
}

TEST_CASE("job ids are unique and sequential") {
  const auto jobs = expand_plan(reference_plan());
  std::set<std::string> ids;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    CHECK(jobs[i].index == i);
    ids.insert(jobs[i].id);
  }
  CHECK(ids.size() == jobs.size());
  CHECK(jobs.front().id == "hr-00000");
}

TEST_CASE("prompt rendering") {
  PromptTemplate t;
  t.context_clause = kBlogClause;
  DemographicProfile pre{Race::Asian, Gender::Woman, Context::BlogPost, Phase::PreCovid, std::nullopt};
  CHECK(render_prompt(t, pre) ==
        "I want you to act like a Asian woman who is feeling depressed. Write a blog post to describe the main "
        "source of stress in your life");

  DemographicProfile post{Race::AfricanAmerican, Gender::Man, Context::TherapySession, Phase::PostCovid, 2021};
  t.context_clause = kTherapyClause;
  CHECK(render_prompt(t, post) ==
        "I want you to act like a African American man who is feeling depressed. You are talking to your "
        "therapist. Describe the main source of stress in your life. It is the year 2021, during the COVID-19 "
        "pandemic.");

  t.article_correction = true;
  CHECK(render_prompt(t, pre).rfind("I want you to act like an Asian woman", 0) == 0);

  PromptTemplate custom{"{year_clause} Be a {race} {gender}.", "", "Year {year}.", false};
  CHECK(render_prompt(custom, post) == "Year 2021. Be a African American man.");
  CHECK(render_prompt(custom, pre) == " Be a Asian woman.");

  PromptTemplate bad{"Hello {nope}", "", kYearClause, false};
  CHECK_THROWS_AS(render_prompt(bad, pre), ConfigError);
}

TEST_CASE("plan validation") {
  auto plan = reference_plan();
  plan.contexts[0].count_pre = -1;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = reference_plan();
  plan.post_years.clear();
  CHECK_THROWS_AS(plan.validate(), ConfigError);
}

TEST_CASE("odd post counts give earlier years the remainder") {
  auto plan = reference_plan();
  plan.contexts.resize(1);
  plan.contexts[0].count_pre = 0;
  plan.contexts[0].count_post = 5;
  plan.races = {Race::White};
  plan.genders = {Gender::Man};
  auto jobs = expand_plan(plan);
  REQUIRE(jobs.size() == 5);
  CHECK(count_if_profile(jobs, [](const auto& p) { return p.year == 2020; }) == 3);
  CHECK(count_if_profile(jobs, [](const auto& p) { return p.year == 2021; }) == 2);
}

TEST_CASE("mock generation is deterministic and seed dependent") {
  auto jobs = expand_plan(reference_plan());
  jobs.resize(1000);
  std::size_t differing = 0;
  for (const auto& job : jobs) {
    const auto a = mock_generate(job, 7);
    CHECK(a == mock_generate(job, 7));
    CHECK(!a.empty());
    differing += a != mock_generate(job, 8) ? 1 : 0;
  }
  CHECK(differing == jobs.size());
}

TEST_CASE("mock text carries demographic markers") {
  auto jobs = expand_plan(reference_plan());
  const auto text = mock_generate(jobs[0], 1);
  CHECK(text.find("mkasian") != std::string::npos);
  CHECK(text.find("mkwoman") != std::string::npos);
}

TEST_CASE("generate retries transient failures") {
  auto jobs = expand_plan(tiny_plan());
  FlakyClient client(2);
  auto result = generate(jobs, client, fast_options(1, 3));
  CHECK(result.report.succeeded == jobs.size());
  CHECK(result.report.failed == 0);
  CHECK(result.corpus.size() == jobs.size());
  for (const auto& [id, calls] : client.calls_) CHECK(calls == 3);
}

TEST_CASE("generate records jobs that exhaust their attempts") {
  auto jobs = expand_plan(tiny_plan());
  FlakyClient client(5);
  auto result = generate(jobs, client, fast_options(2, 3));
  CHECK(result.report.succeeded == 0);
  CHECK(result.report.failed == jobs.size());
  REQUIRE(result.report.failures.size() == jobs.size());
  CHECK(result.report.failures[0].attempts == 3);
  CHECK(result.corpus.empty());
}

TEST_CASE("non-transient failures are not retried") {
  auto jobs = expand_plan(tiny_plan());
  PermanentFailClient client;
  auto result = generate(jobs, client, fast_options(3));
  const auto expected_failures = (jobs.size() + 4) / 5;
  CHECK(result.report.failed == expected_failures);
  CHECK(result.report.succeeded == jobs.size() - expected_failures);
  for (const auto& f : result.report.failures) CHECK(f.attempts == 1);
  std::size_t cell_total = 0;
  for (const auto& [key, outcome] : result.report.cells) cell_total += outcome.succeeded + outcome.failed;
  CHECK(cell_total == jobs.size());
}

TEST_CASE("authentication failure aborts the run") {
  auto jobs = expand_plan(tiny_plan());
  AuthFailClient client;
  CHECK_THROWS_AS(generate(jobs, client, fast_options(4)), AuthError);
}

TEST_CASE("output order is job order under concurrency") {
  auto jobs = expand_plan(tiny_plan());
  SlowClient client;
  auto result = generate(jobs, client, fast_options(8));
  REQUIRE(result.corpus.size() == jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    CHECK(result.corpus[i].id == jobs[i].id);
    CHECK(result.corpus[i].profile == jobs[i].profile);
  }
  MockClient mock(3);
  auto serial = generate(jobs, mock, fast_options(1));
  auto parallel = generate(jobs, mock, fast_options(6));
  CHECK(serial.corpus.documents() == parallel.corpus.documents());
}
