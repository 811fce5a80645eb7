#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emllm/session.hpp"

namespace emllm {

// Any chat-completions style endpoint: POST {base_url}/chat/completions.
struct LlmEndpointConfig {
  std::string base_url{"http://127.0.0.1:8000/v1"};
  std::string model{"falcon-7b-instruct"};
  std::string api_key;  // held in memory only; never logged or persisted
  double timeout_s{60.0};
  int max_retries{2};
  double temperature{0.7};
  double backoff_initial_s{0.5};  // doubles on every retry

  // Everything except the key.
  nlohmann::json redacted() const;
};

// Reads EMLLM_LLM_URL, EMLLM_LLM_MODEL and EMLLM_LLM_KEY over the defaults.
LlmEndpointConfig llm_config_from_env(LlmEndpointConfig base = {});

struct ChatTurn {
  std::string role;
  std::string content;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Returns the assistant reply or throws ChatError (kLlmUnavailable,
  // kLlmRejected, kTimeout).
  virtual std::string complete(const std::vector<ChatTurn>& messages) = 0;
};

nlohmann::json completion_request_body(const LlmEndpointConfig& cfg,
                                       const std::vector<ChatTurn>& messages);
// Extracts choices[0].message.content.
std::string parse_completion_response(const std::string& body);

// Retries connection failures, timeouts, 429 and 5xx up to max_retries times
// with exponential backoff; other 4xx fail immediately as kLlmRejected.
class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(LlmEndpointConfig cfg);
  std::string complete(const std::vector<ChatTurn>& messages) override;

  using Sleeper = std::function<void(double seconds)>;
  void set_sleeper(Sleeper s) { sleep_ = std::move(s); }

 private:
  LlmEndpointConfig cfg_;
  std::string origin_;       // scheme://host:port
  std::string path_prefix_;  // e.g. "/v1"
  Sleeper sleep_;
};

}  // namespace emllm
