#include "emllm/session.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>

#include "emllm/json_io.hpp"

namespace emllm {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json message_json(const ChatMessage& m) {
  json j = {{"role", m.role}, {"text", m.text}, {"ts_ms", m.ts_ms}};
  if (m.failure) j["failure"] = *m.failure;
  return j;
}

json rating_json(const SessionRating& r) {
  return {{"quality", r.quality}, {"empathy", r.empathy}, {"comment", r.comment},
          {"ts_ms", r.ts_ms}};
}

json context_json(const PromptContext& c) {
  return {{"user_name", c.user_name},
          {"locale", c.locale},
          {"persona_directives", c.persona_directives},
          {"summary", c.summary}};
}

PromptContext context_from_json(const json& j) {
  PromptContext c;
  c.user_name = j.at("user_name").get<std::string>();
  c.locale = j.at("locale").get<std::string>();
  c.persona_directives = j.at("persona_directives").get<std::vector<std::string>>();
  c.summary = j.at("summary").get<StressSummary>();
  return c;
}

void apply_event(ChatSession& s, const json& e) {
  const auto kind = e.at("event").get<std::string>();
  if (kind == "message") {
    ChatMessage m;
    m.role = e.at("role").get<std::string>();
    m.text = e.at("text").get<std::string>();
    m.ts_ms = e.at("ts_ms").get<int64_t>();
    if (e.contains("failure")) m.failure = e.at("failure").get<std::string>();
    s.messages.push_back(std::move(m));
  } else if (kind == "failure") {
    const auto idx = e.at("index").get<size_t>();
    if (idx >= s.messages.size()) throw std::out_of_range("failure refers to unknown message");
    s.messages[idx].failure = e.at("error").get<std::string>();
  } else if (kind == "rating") {
    s.rating = SessionRating{e.at("quality").get<int>(), e.at("empathy").get<int>(),
                             e.at("comment").get<std::string>(), e.at("ts_ms").get<int64_t>()};
  } else {
    throw std::invalid_argument("unknown event '" + kind + "'");
  }
}

}  // namespace

const char* to_string(ChatError::Kind kind) {
  switch (kind) {
    case ChatError::Kind::kLlmUnavailable: return "LlmUnavailable";
    case ChatError::Kind::kLlmRejected: return "LlmRejected";
    case ChatError::Kind::kTimeout: return "Timeout";
    case ChatError::Kind::kSessionNotFound: return "SessionNotFound";
    case ChatError::Kind::kInvalidInput: return "InvalidInput";
    case ChatError::Kind::kStorage: return "Storage";
  }
  return "Unknown";
}

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
  }
  return true;
}

json session_to_json(const ChatSession& s) {
  json messages = json::array();
  for (const auto& m : s.messages) messages.push_back(message_json(m));
  return {{"session_id", s.session_id},
          {"created_at_ms", s.created_at_ms},
          {"context", context_json(s.context)},
          {"messages", messages},
          {"rating", s.rating ? rating_json(*s.rating) : json(nullptr)}};
}

SessionStore::SessionStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (!fs::is_directory(dir_)) {
    throw ChatError(ChatError::Kind::kStorage, "cannot create session directory " + dir_.string());
  }
}

fs::path SessionStore::path_for(const std::string& session_id) const {
  if (!valid_session_id(session_id)) {
    throw ChatError(ChatError::Kind::kSessionNotFound, "invalid session id");
  }
  return dir_ / (session_id + ".jsonl");
}

bool SessionStore::exists(const std::string& session_id) const {
  return valid_session_id(session_id) && fs::is_regular_file(path_for(session_id));
}

void SessionStore::append_line(const std::string& session_id, const json& event) {
  const auto line = event.dump() + "\n";
  std::FILE* f = std::fopen(path_for(session_id).c_str(), "ab");
  if (f == nullptr) throw ChatError(ChatError::Kind::kStorage, "cannot open session log");
  const bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size() && std::fflush(f) == 0;
  std::fclose(f);
  if (!ok) throw ChatError(ChatError::Kind::kStorage, "failed writing session log");
}

void SessionStore::append_created(const ChatSession& s) {
  append_line(s.session_id, {{"event", "created"},
                             {"session_id", s.session_id},
                             {"created_at_ms", s.created_at_ms},
                             {"context", context_json(s.context)}});
}

void SessionStore::append_message(const std::string& session_id, const ChatMessage& m) {
  json e = message_json(m);
  e["event"] = "message";
  append_line(session_id, e);
}

void SessionStore::append_failure(const std::string& session_id, size_t index,
                                  const std::string& error) {
  append_line(session_id, {{"event", "failure"}, {"index", index}, {"error", error}});
}

void SessionStore::append_rating(const std::string& session_id, const SessionRating& r) {
  json e = rating_json(r);
  e["event"] = "rating";
  append_line(session_id, e);
}

void SessionStore::persist(const ChatSession& s) {
  const auto path = path_for(s.session_id);
  std::error_code ec;
  fs::remove(path, ec);
  append_created(s);
  for (const auto& m : s.messages) {
    ChatMessage plain = m;
    plain.failure.reset();
    append_message(s.session_id, plain);
  }
  for (size_t i = 0; i < s.messages.size(); ++i) {
    if (s.messages[i].failure) append_failure(s.session_id, i, *s.messages[i].failure);
  }
  if (s.rating) append_rating(s.session_id, *s.rating);
}

SessionStore::Loaded SessionStore::load(const std::string& session_id) const {
  const auto path = path_for(session_id);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ChatError(ChatError::Kind::kSessionNotFound, "no session " + session_id);

  Loaded out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // A final line without its newline was cut off mid-write.
    const bool complete = !in.eof();
    try {
      if (!complete) throw std::runtime_error("incomplete final line");
      const json e = json::parse(line);
      if (line_no == 1) {
        if (e.at("event").get<std::string>() != "created") {
          throw std::runtime_error("first event is not 'created'");
        }
        out.session.session_id = e.at("session_id").get<std::string>();
        out.session.created_at_ms = e.at("created_at_ms").get<int64_t>();
        out.session.context = context_from_json(e.at("context"));
      } else {
        apply_event(out.session, e);
      }
      ++out.valid_lines;
    } catch (const std::exception& e) {
      if (line_no == 1) {
        throw ChatError(ChatError::Kind::kStorage,
                        "session " + session_id + " has a corrupt header: " + e.what());
      }
      out.truncated = true;
      out.warning = "session log truncated at line " + std::to_string(line_no) + ": " + e.what();
      break;
    }
  }
  if (line_no == 0) throw ChatError(ChatError::Kind::kStorage, "session " + session_id + " is empty");
  return out;
}

}  // namespace emllm
