#include "emllm/chat_service.hpp"

#include <chrono>
#include <cstdio>
#include <random>

#include "emllm/rng.hpp"

namespace emllm {

ChatService::ChatService(ChatServiceConfig config, std::shared_ptr<StressMonitor> monitor,
                         std::shared_ptr<LlmClient> llm)
    : config_(std::move(config)),
      monitor_(std::move(monitor)),
      llm_(std::move(llm)),
      store_(config_.data_dir) {
  if (!llm_) throw ChatError(ChatError::Kind::kInvalidInput, "chat service needs an LLM client");
  std::random_device rd;
  id_salt_ = (static_cast<uint64_t>(rd()) << 32) ^ rd() ^
             static_cast<uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
}

int64_t ChatService::now_ms() const {
  if (config_.clock_ms) return config_.clock_ms();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string ChatService::new_session_id() {
  Rng rng(id_salt_ + ++id_counter_);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(rng.next_u64()));
  return buf;
}

StressSummary ChatService::stress_summary() const {
  return monitor_ ? monitor_->summary() : StressSummary{};
}

size_t ChatService::push_signals(const std::string& channel, std::span<const TimedSample> samples) {
  if (!monitor_) throw StreamError(StreamError::Kind::kUnknownChannel, "no monitor configured");
  const size_t n = monitor_->push_samples(channel, samples);
  monitor_->tick();
  return n;
}

ChatSession ChatService::create_session(const std::string& user_name) {
  auto ctx = make_prompt_context(user_name, stress_summary(), config_.locale);
  for (const auto& d : config_.extra_directives) ctx.persona_directives.push_back(d);

  auto s = std::make_shared<Slot>();
  std::lock_guard<std::mutex> lock(s->mu);
  {
    std::lock_guard<std::mutex> map_lock(map_mu_);
    std::string id;
    do {
      id = new_session_id();
    } while (sessions_.count(id) || store_.exists(id));
    s->session.session_id = id;
    sessions_[id] = s;
  }
  auto& session = s->session;
  session.created_at_ms = now_ms();
  session.context = std::move(ctx);
  store_.append_created(session);
  const ChatMessage system{"system", build_system_prompt(session.context), session.created_at_ms, {}};
  session.messages.push_back(system);
  store_.append_message(session.session_id, system);
  const ChatMessage hello{"assistant", greeting(session.context), session.created_at_ms, {}};
  session.messages.push_back(hello);
  store_.append_message(session.session_id, hello);
  return session;
}

std::shared_ptr<ChatService::Slot> ChatService::slot(const std::string& session_id) {
  std::lock_guard<std::mutex> lock(map_mu_);
  auto it = sessions_.find(session_id);
  if (it != sessions_.end()) return it->second;
  if (!store_.exists(session_id)) {
    throw ChatError(ChatError::Kind::kSessionNotFound, "no session " + session_id);
  }
  auto s = std::make_shared<Slot>();
  s->session = store_.load(session_id).session;
  sessions_[session_id] = s;
  return s;
}

ChatSession ChatService::get_session(const std::string& session_id) {
  auto s = slot(session_id);
  std::lock_guard<std::mutex> lock(s->mu);
  return s->session;
}

std::string ChatService::send_message(const std::string& session_id, const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ChatError(ChatError::Kind::kInvalidInput, "message text is empty");
  }
  auto s = slot(session_id);
  std::lock_guard<std::mutex> lock(s->mu);
  auto& session = s->session;

  const ChatMessage user{"user", text, now_ms(), {}};
  session.messages.push_back(user);
  store_.append_message(session_id, user);
  const size_t user_index = session.messages.size() - 1;

  std::vector<ChatTurn> turns;
  turns.reserve(session.messages.size());
  for (const auto& m : session.messages) turns.push_back({m.role, m.text});

  std::string reply;
  try {
    reply = llm_->complete(turns);
  } catch (const ChatError& e) {
    const std::string marker = to_string(e.kind());
    session.messages[user_index].failure = marker;
    store_.append_failure(session_id, user_index, marker);
    throw;
  }
  const ChatMessage assistant{"assistant", reply, now_ms(), {}};
  session.messages.push_back(assistant);
  store_.append_message(session_id, assistant);
  return reply;
}

void ChatService::rate_session(const std::string& session_id, int quality, int empathy,
                               const std::string& comment) {
  if (quality < 1 || quality > 5 || empathy < 1 || empathy > 5) {
    throw ChatError(ChatError::Kind::kInvalidInput, "ratings must be between 1 and 5");
  }
  auto s = slot(session_id);
  std::lock_guard<std::mutex> lock(s->mu);
  SessionRating r{quality, empathy, comment, now_ms()};
  store_.append_rating(session_id, r);
  s->session.rating = r;
}

}  // namespace emllm
