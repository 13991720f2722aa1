#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "headroom/llm_client.hpp"

#include <httplib.h>

#include <cstdlib>
#include <nlohmann/json.hpp>

namespace headroom {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string build_request_body(const LlmClientConfig& config, const PromptJob& job) {
  nlohmann::ordered_json body;
  body["model"] = config.model;
  if (config.style == ApiStyle::Chat) {
    body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", job.rendered_prompt}}});
  } else {
    body["prompt"] = job.rendered_prompt;
  }
  body["temperature"] = job.sampling.temperature;
  body["max_tokens"] = job.sampling.max_tokens;
  if (job.sampling.seed) body["seed"] = *job.sampling.seed;
  return body.dump();
}

std::string parse_response_body(ApiStyle style, const std::string& body) {
  nlohmann::json json;
  try {
    json = nlohmann::json::parse(body);
    const auto& choice = json.at("choices").at(0);
    const auto& text = style == ApiStyle::Chat ? choice.at("message").at("content") : choice.at("text");
    return trim(text.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw UpstreamError(std::string("malformed completion response: ") + e.what());
  }
}

namespace {

std::string api_key_from_env(const std::string& variable) {
  const char* key = std::getenv(variable.c_str());
  if (key == nullptr || *key == '\0') throw ConfigError("API key environment variable " + variable + " is not set");
  return key;
}

}  // namespace

HttpLlmClient::HttpLlmClient(LlmClientConfig config)
    : HttpLlmClient(config, api_key_from_env(config.api_key_env)) {}

HttpLlmClient::HttpLlmClient(LlmClientConfig config, std::string api_key)
    : config_(std::move(config)), api_key_(std::move(api_key)) {
  const auto& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::string HttpLlmClient::describe() const { return config_.model + "@" + config_.endpoint; }

std::string HttpLlmClient::complete(const PromptJob& job) {
  // One client per call keeps the object safe to share across worker threads.
  httplib::Client http(origin_);
  http.set_connection_timeout(config_.timeout_seconds, 0);
  http.set_read_timeout(config_.timeout_seconds, 0);
  http.set_write_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

  auto res = http.Post(path_, headers, build_request_body(config_, job), "application/json");
  if (!res) throw TransientError("request failed: " + httplib::to_string(res.error()));

  const int status = res->status;
  if (status == 401 || status == 403) throw AuthError("authentication rejected (HTTP " + std::to_string(status) + ")");
  if (status == 408 || status == 429 || status >= 500)
    throw TransientError("HTTP " + std::to_string(status) + " from " + config_.endpoint);
  if (status < 200 || status >= 300)
    throw UpstreamError("HTTP " + std::to_string(status) + " from " + config_.endpoint + ": " + res->body);
  return parse_response_body(config_.style, res->body);
}

}  // namespace headroom
