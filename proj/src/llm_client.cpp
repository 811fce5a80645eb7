#include "emllm/llm_client.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace emllm {

using json = nlohmann::json;

json LlmEndpointConfig::redacted() const {
  return {{"base_url", base_url},     {"model", model},
          {"api_key_set", !api_key.empty()}, {"timeout_s", timeout_s},
          {"max_retries", max_retries}, {"temperature", temperature}};
}

LlmEndpointConfig llm_config_from_env(LlmEndpointConfig base) {
  if (const char* v = std::getenv("EMLLM_LLM_URL"); v && *v) base.base_url = v;
  if (const char* v = std::getenv("EMLLM_LLM_MODEL"); v && *v) base.model = v;
  if (const char* v = std::getenv("EMLLM_LLM_KEY"); v && *v) base.api_key = v;
  return base;
}

json completion_request_body(const LlmEndpointConfig& cfg, const std::vector<ChatTurn>& messages) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", cfg.model}, {"messages", msgs}, {"temperature", cfg.temperature}};
}

std::string parse_completion_response(const std::string& body) {
  try {
    const auto j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ChatError(ChatError::Kind::kLlmUnavailable,
                    std::string("malformed completion response: ") + e.what());
  }
}

HttpLlmClient::HttpLlmClient(LlmEndpointConfig cfg) : cfg_(std::move(cfg)) {
  const auto& url = cfg_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ChatError(ChatError::Kind::kInvalidInput, "LLM base_url needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (url.compare(0, scheme_end, "http") != 0) {
    throw ChatError(ChatError::Kind::kInvalidInput,
                    "only http:// LLM endpoints are supported in this build");
  }
  sleep_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
}

std::string HttpLlmClient::complete(const std::vector<ChatTurn>& messages) {
  const std::string body = completion_request_body(cfg_, messages).dump();
  const std::string path = path_prefix_ + "/chat/completions";
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  const auto secs = static_cast<time_t>(std::floor(cfg_.timeout_s));
  const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);

  ChatError::Kind last_kind = ChatError::Kind::kLlmUnavailable;
  std::string last_detail;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) sleep_(cfg_.backoff_initial_s * std::pow(2.0, attempt - 1));
    httplib::Client client(origin_);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      // httplib reports a read timeout as a plain read error; tell them apart by time.
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             ((err == httplib::Error::Read || err == httplib::Error::Write) &&
                              elapsed >= 0.9 * cfg_.timeout_s);
      last_kind = timed_out ? ChatError::Kind::kTimeout : ChatError::Kind::kLlmUnavailable;
      last_detail = httplib::to_string(err);
      continue;
    }
    if (res->status >= 200 && res->status < 300) return parse_completion_response(res->body);
    if (res->status == 429 || res->status >= 500) {
      last_kind = ChatError::Kind::kLlmUnavailable;
      last_detail = "HTTP " + std::to_string(res->status);
      continue;
    }
    throw ChatError(ChatError::Kind::kLlmRejected,
                    "LLM endpoint rejected the request: HTTP " + std::to_string(res->status));
  }
  throw ChatError(last_kind, "LLM endpoint failed after " + std::to_string(cfg_.max_retries + 1) +
                                 " attempts: " + last_detail);
}

}  // namespace emllm
