#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "headroom/llm_client.hpp"
#include "headroom/synthgen.hpp"
#include "headroom/topicmodel.hpp"

namespace headroom {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitUpstream = 3 };

struct GroupPair {
  std::string group_a;
  std::string group_b;
};

// Everything a command needs; filled from the JSON config file, then
// overridden by command-line flags. Relative paths resolve against the
// config file's directory.
struct RunConfig {
  std::vector<std::filesystem::path> corpus_paths;
  std::filesystem::path lexicon;

  std::filesystem::path embeddings;
  std::size_t embedding_dimension = 300;
  std::size_t baseline_exclude_top = 1000;
  std::size_t baseline_trials = 1000;
  std::size_t baseline_set_size = 30;
  std::string oov_policy = "skip";
  double match_threshold = 0.0;

  GenerationPlan plan = reference_plan();
  LlmClientConfig llm;

  LdaOptions lda;
  std::size_t n_keywords = kDefaultKeywordCount;
  std::size_t min_df = 2;
  std::filesystem::path topic_mapping;

  std::string prior = "uniform";  // "uniform" or a category,count CSV
  double prior_scale = 500.0;
  std::vector<int> top_k = {5, 15};

  std::size_t bootstrap_replicates = 1000;
  unsigned threads = 1;
  std::vector<GroupPair> pairs;

  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  bool mock = false;
};

// Throws ConfigError on unknown keys or wrong types.
RunConfig load_config(const std::filesystem::path& path);

// Full command-line entry point: returns the process exit code and never
// throws. Diagnostics go to err, human-readable results to out.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace headroom
