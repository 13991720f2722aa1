#include "headroom/synthgen.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <mutex>
#include <random>
#include <string_view>
#include <thread>

#include "headroom/text.hpp"

namespace headroom {

namespace {

std::string gender_noun(Gender gender) {
  switch (gender) {
    case Gender::Woman: return "woman";
    case Gender::Man: return "man";
    case Gender::Other: return "person";
  }
  return "person";
}

bool starts_with_vowel(std::string_view word) {
  if (word.empty()) return false;
  switch (std::tolower(static_cast<unsigned char>(word.front()))) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return true;
    default: return false;
  }
}

// Replaces every {name} slot using lookup; throws ConfigError on unknown or
// unresolvable slots.
template <typename Lookup>
std::string substitute(std::string_view text, Lookup&& lookup) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    auto close = text.find('}', open);
    if (close == std::string_view::npos) throw ConfigError("unterminated slot in template: " + std::string(text));
    out.append(text.substr(pos, open - pos));
    const auto name = text.substr(open + 1, close - open - 1);
    std::optional<std::string> value = lookup(name);
    if (!value) throw ConfigError("unresolved template slot {" + std::string(name) + "}");
    out += *value;
    pos = close + 1;
  }
  return out;
}

}  // namespace

std::string render_prompt(const PromptTemplate& tmpl, const DemographicProfile& profile) {
  const std::string race(to_string(profile.race));
  const bool post = profile.phase == Phase::PostCovid;

  auto year_value = [&]() -> std::optional<std::string> {
    if (!post || !profile.year) return std::nullopt;
    return std::to_string(*profile.year);
  };
  auto year_clause = [&]() -> std::optional<std::string> {
    if (!post) return std::string{};
    return substitute(tmpl.year_clause, [&](std::string_view name) -> std::optional<std::string> {
      if (name == "year") return year_value();
      return std::nullopt;
    });
  };

  std::string text = tmpl.text;
  if (tmpl.article_correction && starts_with_vowel(race)) {
    for (std::string_view from : {"a {race}", "A {race}"}) {
      std::string to = from.front() == 'a' ? "an {race}" : "An {race}";
      for (auto at = text.find(from); at != std::string::npos; at = text.find(from, at + to.size())) {
        if (at > 0 && std::isalpha(static_cast<unsigned char>(text[at - 1]))) continue;
        text.replace(at, from.size(), to);
      }
    }
  }

  const bool has_year_slot = text.find("{year_clause}") != std::string::npos;
  std::string rendered = substitute(text, [&](std::string_view name) -> std::optional<std::string> {
    if (name == "race") return race;
    if (name == "gender") return gender_noun(profile.gender);
    if (name == "context_clause") return tmpl.context_clause;
    if (name == "year") return year_value();
    if (name == "year_clause") return year_clause();
    return std::nullopt;
  });

  if (post && !has_year_slot) {
    auto clause = *year_clause();
    if (!clause.empty()) {
      while (!rendered.empty() && std::isspace(static_cast<unsigned char>(rendered.back()))) rendered.pop_back();
      if (!rendered.empty() && rendered.back() != '.' && rendered.back() != '!' && rendered.back() != '?')
        rendered.push_back('.');
      rendered += " " + clause;
    }
  }
  return rendered;
}

std::string default_context_clause(Context context) {
  switch (context) {
    case Context::BlogPost: return kBlogClause;
    case Context::RedditPost: return kRedditClause;
    case Context::TherapySession: return kTherapyClause;
    case Context::Unspecified: return "Describe the main source of stress in your life";
  }
  return {};
}

void GenerationPlan::validate() const {
  for (const auto& ctx : contexts) {
    if (ctx.count_pre < 0 || ctx.count_post < 0)
      throw ConfigError("generation counts must be non-negative for context " + std::string(to_string(ctx.context)));
    if (ctx.count_post > 0 && post_years.empty())
      throw ConfigError("post-COVID counts need at least one year");
  }
  for (int year : post_years)
    if (year != 2020 && year != 2021) throw ConfigError("post-COVID years must be 2020 or 2021");
}

std::size_t GenerationPlan::total() const {
  std::size_t per_cell = 0;
  for (const auto& ctx : contexts) per_cell += static_cast<std::size_t>(ctx.count_pre + ctx.count_post);
  return per_cell * races.size() * genders.size();
}

GenerationPlan reference_plan() {
  GenerationPlan plan;
  plan.races = {Race::Asian, Race::AfricanAmerican, Race::Hispanic, Race::White};
  plan.genders = {Gender::Woman, Gender::Man};
  auto make = [](Context context, int pre, int post) {
    ContextPlan ctx;
    ctx.context = context;
    ctx.prompt.context_clause = default_context_clause(context);
    ctx.count_pre = pre;
    ctx.count_post = post;
    return ctx;
  };
  plan.contexts = {make(Context::BlogPost, 30, 60), make(Context::RedditPost, 75, 75),
                   make(Context::TherapySession, 75, 75)};
  return plan;
}

std::vector<PromptJob> expand_plan(const GenerationPlan& plan) {
  if (plan.races.empty()) throw ConfigError("generation plan has no races");
  if (plan.genders.empty()) throw ConfigError("generation plan has no genders");
  plan.validate();

  std::vector<PromptJob> jobs;
  jobs.reserve(plan.total());
  auto emit = [&](const ContextPlan& ctx, DemographicProfile profile, int replicates) {
    for (int r = 0; r < replicates; ++r) {
      PromptJob job;
      job.index = jobs.size();
      char id[32];
      std::snprintf(id, sizeof id, "hr-%05zu", job.index);
      job.id = id;
      job.profile = profile;
      job.rendered_prompt = render_prompt(ctx.prompt, profile);
      job.sampling = plan.sampling;
      jobs.push_back(std::move(job));
    }
  };

  const auto years = static_cast<int>(plan.post_years.size());
  for (const auto& ctx : plan.contexts) {
    for (auto race : plan.races) {
      for (auto gender : plan.genders) {
        DemographicProfile profile{race, gender, ctx.context, Phase::PreCovid, std::nullopt};
        emit(ctx, profile, ctx.count_pre);
        profile.phase = Phase::PostCovid;
        for (int y = 0; y < years; ++y) {
          profile.year = plan.post_years[static_cast<std::size_t>(y)];
          emit(ctx, profile, ctx.count_post / years + (y < ctx.count_post % years ? 1 : 0));
        }
      }
    }
  }
  return jobs;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ splitmix64(v)); }

enum Stressor : std::size_t {
  kWork, kSchool, kFinance, kFamily, kHealth, kRacism, kImmigration, kRelationship, kPandemic, kNews,
  kStressorCount
};

constexpr std::array<std::array<std::string_view, 10>, kStressorCount> kStressorWords = {{
    {"work", "job", "boss", "deadlines", "overtime", "shifts", "career", "workload", "meetings", "coworkers"},
    {"school", "exams", "grades", "classes", "college", "tuition", "homework", "professors", "expectations", "degree"},
    {"money", "bills", "rent", "debt", "loans", "paycheck", "savings", "expenses", "budget", "groceries"},
    {"family", "mother", "father", "siblings", "children", "parents", "home", "relatives", "household", "kids"},
    {"health", "doctor", "illness", "pain", "sleep", "medication", "appointments", "diagnosis", "body", "hospital"},
    {"racism", "police", "discrimination", "violence", "profiling", "injustice", "neighborhood", "safety", "prejudice", "protests"},
    {"immigration", "deportation", "visa", "status", "border", "paperwork", "citizenship", "language", "documents", "accent"},
    {"relationship", "partner", "boyfriend", "girlfriend", "marriage", "breakup", "loneliness", "friends", "dating", "trust"},
    {"pandemic", "covid", "lockdown", "quarantine", "virus", "vaccine", "masks", "isolation", "infection", "outbreak"},
    {"news", "politics", "media", "election", "climate", "economy", "headlines", "inflation", "government", "war"},
}};

constexpr std::array<std::string_view, 8> kFrames = {
    "I keep thinking about {a} and {b}.",
    "Lately {a} has been weighing on me more than ever.",
    "Every single day I worry about {a}, {b} and {c}.",
    "It feels like the {a} never ends and I am exhausted.",
    "The main source of stress in my life is {a}.",
    "I can't stop stressing about {a} and what it means for {b}.",
    "Between {a} and {b} I barely sleep at night.",
    "Nobody seems to understand how much {a} affects me.",
};

constexpr std::array<std::string_view, 4> kWomanLines = {
    "My mother keeps telling me she is worried about me.",
    "As a woman I feel like her expectations are impossible.",
    "My sister says she understands but I feel alone.",
    "I feel sad and I cry when I think about my daughter.",
};

constexpr std::array<std::string_view, 4> kManLines = {
    "My father says he is proud but I doubt it.",
    "As a man I feel like I have to hide it from my brother.",
    "My dad tells me he expects me to handle everything.",
    "I feel like he and his friends would laugh at me.",
};

std::array<int, kStressorCount> stressor_weights(const DemographicProfile& p) {
  std::array<int, kStressorCount> w{};
  w.fill(1);
  switch (p.race) {
    case Race::Asian: w[kWork] += 4; w[kSchool] += 4; w[kFamily] += 2; break;
    case Race::AfricanAmerican: w[kRacism] += 5; w[kFinance] += 2; w[kWork] += 1; break;
    case Race::Hispanic: w[kImmigration] += 5; w[kFinance] += 2; w[kFamily] += 2; break;
    case Race::White: w[kHealth] += 3; w[kRelationship] += 2; w[kNews] += 3; break;
    case Race::Other: break;
  }
  if (p.gender == Gender::Woman) {
    w[kFamily] += 2;
    w[kRelationship] += 2;
    w[kHealth] += 2;
  } else if (p.gender == Gender::Man) {
    w[kFinance] += 2;
    w[kWork] += 2;
  }
  w[kPandemic] = p.phase == Phase::PostCovid ? 8 : 0;
  return w;
}

std::string_view race_marker(Race race) {
  switch (race) {
    case Race::Asian: return "mkasian";
    case Race::AfricanAmerican: return "mkafricanamerican";
    case Race::Hispanic: return "mkhispanic";
    case Race::White: return "mkwhite";
    case Race::Other: return "mkotherrace";
  }
  return "mkotherrace";
}

std::string_view gender_marker(Gender gender) {
  switch (gender) {
    case Gender::Woman: return "mkwoman";
    case Gender::Man: return "mkman";
    case Gender::Other: return "mkothergender";
  }
  return "mkothergender";
}

std::string_view context_opening(Context context) {
  switch (context) {
    case Context::BlogPost: return "Dear readers, this is hard to write.";
    case Context::RedditPost: return "Throwaway account because people know my main.";
    case Context::TherapySession: return "Well, I am not sure where to start.";
    case Context::Unspecified: return "I need to get this off my chest.";
  }
  return {};
}

}  // namespace

std::string mock_generate(const PromptJob& job, std::uint64_t seed) {
  const auto& p = job.profile;
  std::uint64_t h = splitmix64(seed);
  h = mix(h, job.index);
  h = mix(h, static_cast<std::uint64_t>(p.race));
  h = mix(h, static_cast<std::uint64_t>(p.gender));
  h = mix(h, static_cast<std::uint64_t>(p.context));
  h = mix(h, static_cast<std::uint64_t>(p.phase));
  h = mix(h, static_cast<std::uint64_t>(p.year.value_or(0)));
  std::mt19937_64 rng(h);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  const auto weights = stressor_weights(p);
  int weight_total = 0;
  for (int w : weights) weight_total += w;
  auto pick_stressor = [&] {
    auto r = static_cast<int>(pick(static_cast<std::size_t>(weight_total)));
    for (std::size_t s = 0; s < kStressorCount; ++s) {
      if (r < weights[s]) return s;
      r -= weights[s];
    }
    return std::size_t{kWork};
  };

  std::string text(context_opening(p.context));
  text += " I am ";
  text += race_marker(p.race);
  text += ' ';
  text += gender_marker(p.gender);
  text += " and I have been feeling depressed.";
  if (p.phase == Phase::PostCovid) text += " It is " + std::to_string(*p.year) + " and everything changed.";

  const std::size_t sentences = 5 + pick(4);
  for (std::size_t s = 0; s < sentences; ++s) {
    const auto& words = kStressorWords[pick_stressor()];
    const auto frame = kFrames[pick(kFrames.size())];
    text += ' ';
    for (std::size_t i = 0; i < frame.size(); ++i) {
      if (frame[i] == '{' && i + 2 < frame.size() && frame[i + 2] == '}') {
        text += words[pick(words.size())];
        i += 2;
      } else {
        text += frame[i];
      }
    }
    if (s == 1 && p.gender != Gender::Other) {
      text += ' ';
      text += p.gender == Gender::Woman ? kWomanLines[pick(kWomanLines.size())] : kManLines[pick(kManLines.size())];
    }
  }
  return text;
}

namespace {

CellKey cell_of(const DemographicProfile& p) {
  return {p.race, p.gender, p.context, p.phase, p.year.value_or(0)};
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

GenerationResult generate(const std::vector<PromptJob>& jobs, LlmClient& client, const GenerateOptions& options,
                          const std::string& provenance) {
  if (options.retry.max_attempts < 1) throw ConfigError("retry policy needs max_attempts >= 1");
  if (options.max_concurrent < 1) throw ConfigError("max_concurrent must be >= 1");

  struct Outcome {
    std::optional<std::string> text;
    int attempts = 0;
    std::string error;
  };
  std::vector<Outcome> outcomes(jobs.size());

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex abort_mutex;
  std::exception_ptr abort_error;

  auto run_job = [&](std::size_t i) {
    auto& out = outcomes[i];
    auto backoff = options.retry.initial_backoff;
    for (int attempt = 1; attempt <= options.retry.max_attempts && !abort; ++attempt) {
      out.attempts = attempt;
      try {
        auto text = client.complete(jobs[i]);
        if (blank(text)) throw TransientError("empty completion");
        out.text = std::move(text);
        return;
      } catch (const AuthError&) {
        std::lock_guard lock(abort_mutex);
        if (!abort_error) abort_error = std::current_exception();
        abort = true;
        return;
      } catch (const TransientError& e) {
        out.error = e.what();
        if (attempt < options.retry.max_attempts && backoff.count() > 0) {
          std::this_thread::sleep_for(backoff);
          backoff = std::chrono::milliseconds(
              static_cast<std::int64_t>(static_cast<double>(backoff.count()) * options.retry.backoff_multiplier));
        }
      } catch (const std::exception& e) {
        out.error = e.what();
        return;
      }
    }
  };

  auto worker = [&] {
    while (!abort) {
      const auto i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      run_job(i);
    }
  };

  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(options.max_concurrent), jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (abort_error) std::rethrow_exception(abort_error);

  GenerationResult result;
  auto& report = result.report;
  report.requested = jobs.size();
  std::vector<Document> docs;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& cell = report.cells[cell_of(jobs[i].profile)];
    if (outcomes[i].text) {
      ++cell.succeeded;
      ++report.succeeded;
      docs.push_back(Document{jobs[i].id, std::move(*outcomes[i].text), jobs[i].profile, Source::Synthetic});
    } else {
      ++cell.failed;
      ++report.failed;
      report.failures.push_back({jobs[i].id, outcomes[i].attempts, outcomes[i].error});
    }
  }
  result.corpus = Corpus(std::move(docs), provenance);
  return result;
}

}  // namespace headroom
