#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "emllm/prompt.hpp"

namespace emllm {

class ChatError : public std::runtime_error {
 public:
  enum class Kind {
    kLlmUnavailable,
    kLlmRejected,
    kTimeout,
    kSessionNotFound,
    kInvalidInput,
    kStorage,
  };

  ChatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(ChatError::Kind kind);

struct ChatMessage {
  std::string role;  // "system", "user", "assistant"
  std::string text;
  int64_t ts_ms{0};
  // Set on a user message whose reply could not be obtained.
  std::optional<std::string> failure;

  bool operator==(const ChatMessage&) const = default;
};

struct SessionRating {
  int quality{0};  // 1-5
  int empathy{0};  // 1-5
  std::string comment;
  int64_t ts_ms{0};

  bool operator==(const SessionRating&) const = default;
};

struct ChatSession {
  std::string session_id;
  int64_t created_at_ms{0};
  PromptContext context;
  std::vector<ChatMessage> messages;
  std::optional<SessionRating> rating;

  bool operator==(const ChatSession&) const = default;
};

nlohmann::json session_to_json(const ChatSession& s);

// One JSON event per line, appended and flushed as the session changes:
//   {"event":"created", ...}  {"event":"message", ...}
//   {"event":"failure", "index":n, "error":...}  {"event":"rating", ...}
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir);

  std::filesystem::path path_for(const std::string& session_id) const;
  bool exists(const std::string& session_id) const;

  void append_created(const ChatSession& s);
  void append_message(const std::string& session_id, const ChatMessage& m);
  void append_failure(const std::string& session_id, size_t index, const std::string& error);
  void append_rating(const std::string& session_id, const SessionRating& r);

  struct Loaded {
    ChatSession session;
    bool truncated{false};
    size_t valid_lines{0};
    std::string warning;
  };
  // Replays the log; a corrupt line ends the replay at the last valid line.
  Loaded load(const std::string& session_id) const;

  // Rewrites a whole session as a fresh log (used by tests and tools).
  void persist(const ChatSession& s);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  void append_line(const std::string& session_id, const nlohmann::json& event);

  std::filesystem::path dir_;
};

bool valid_session_id(const std::string& id);

}  // namespace emllm
