#pragma once

#include <string>

#include "headroom/synthgen.hpp"

namespace headroom {

enum class ApiStyle { Completions, Chat };

struct LlmClientConfig {
  // Full URL of the completions or chat/completions endpoint.
  std::string endpoint = "https://api.openai.com/v1/completions";
  std::string model = "text-davinci-003";
  std::string api_key_env = "OPENAI_API_KEY";
  ApiStyle style = ApiStyle::Completions;
  int max_concurrent = 4;
  RetryPolicy retry;
  int timeout_seconds = 60;
};

// JSON request body for one job: {model, prompt|messages, temperature, max_tokens[, seed]}.
std::string build_request_body(const LlmClientConfig& config, const PromptJob& job);

// Extracts the completion text (choices[0].text or choices[0].message.content),
// trimmed of surrounding whitespace. Throws UpstreamError on a malformed body.
std::string parse_response_body(ApiStyle style, const std::string& body);

// Live client. The API key comes only from the named environment variable;
// construction throws ConfigError when it is unset.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(LlmClientConfig config);
  HttpLlmClient(LlmClientConfig config, std::string api_key);

  std::string complete(const PromptJob& job) override;
  std::string describe() const override;

 private:
  LlmClientConfig config_;
  std::string api_key_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
};

}  // namespace headroom
