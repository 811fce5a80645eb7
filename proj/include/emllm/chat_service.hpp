#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "emllm/llm_client.hpp"
#include "emllm/monitor.hpp"
#include "emllm/session.hpp"

namespace emllm {

struct ChatServiceConfig {
  std::filesystem::path data_dir{"emllm-data"};
  std::string locale{"en"};
  std::vector<std::string> extra_directives;
  std::function<int64_t()> clock_ms;  // defaults to the system clock
};

// Sessions, the stress monitor and the LLM behind one facade. Each session
// serializes its own appends; different sessions never wait on each other.
class ChatService {
 public:
  // monitor may be null (no live signals; the summary is then empty).
  ChatService(ChatServiceConfig config, std::shared_ptr<StressMonitor> monitor,
              std::shared_ptr<LlmClient> llm);

  // Snapshots the current StressSummary into the prompt context, writes the
  // system prompt and the templated greeting.
  ChatSession create_session(const std::string& user_name);
  ChatSession get_session(const std::string& session_id);

  // Appends the user text, sends the whole history, appends the reply. On
  // failure the user message stays in the log with a failure marker and the
  // ChatError propagates.
  std::string send_message(const std::string& session_id, const std::string& text);
  void rate_session(const std::string& session_id, int quality, int empathy,
                    const std::string& comment);

  StressSummary stress_summary() const;
  // Pushes a batch into the monitor and runs a tick.
  size_t push_signals(const std::string& channel, std::span<const TimedSample> samples);

  SessionStore& store() { return store_; }

 private:
  struct Slot {
    std::mutex mu;
    ChatSession session;
  };
  std::shared_ptr<Slot> slot(const std::string& session_id);
  int64_t now_ms() const;
  std::string new_session_id();

  ChatServiceConfig config_;
  std::shared_ptr<StressMonitor> monitor_;
  std::shared_ptr<LlmClient> llm_;
  SessionStore store_;
  std::mutex map_mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  uint64_t id_counter_{0};
  uint64_t id_salt_{0};
};

}  // namespace emllm
