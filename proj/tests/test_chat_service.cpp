#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include "emllm/chat_service.hpp"
#include "support.hpp"

using namespace emllm;
using testing_support::MockLlm;
using testing_support::TempDir;

namespace {

// Deterministic LLM double: replies with the count of turns it was given.
class CountingLlm : public LlmClient {
 public:
  std::string complete(const std::vector<ChatTurn>& messages) override {
    ++calls;
    last = messages;
    if (fail) throw ChatError(ChatError::Kind::kLlmUnavailable, "down");
    return "reply to " + std::to_string(messages.size()) + " turns: " + messages.back().content;
  }
  std::atomic<int> calls{0};
  std::vector<ChatTurn> last;
  bool fail{false};
};

ChatServiceConfig config_in(const TempDir& dir) {
  ChatServiceConfig c;
  c.data_dir = dir / "sessions";
  auto clock = std::make_shared<std::atomic<int64_t>>(1000);
  c.clock_ms = [clock] { return clock->fetch_add(1); };
  return c;
}

}  // namespace

TEST_CASE("create, talk, rate, reload") {
  TempDir dir;
  auto llm = std::make_shared<CountingLlm>();
  ChatService svc(config_in(dir), nullptr, llm);
  const auto created = svc.create_session("Alice");
  REQUIRE(created.messages.size() == 2);
  CHECK(created.messages[0].role == "system");
  CHECK(created.messages[1].role == "assistant");
  CHECK(created.messages[1].text.find("Alice") != std::string::npos);
  CHECK(llm->calls == 0);

  CHECK(svc.send_message(created.session_id, "hello") == "reply to 3 turns: hello");
  REQUIRE(llm->last.size() == 3);
  CHECK(llm->last[0].role == "system");
  CHECK(llm->last[0].content == created.messages[0].text);
  svc.send_message(created.session_id, "second");
  CHECK(llm->last.size() == 5);
  svc.rate_session(created.session_id, 4, 5, "kind");

  const auto live = svc.get_session(created.session_id);
  CHECK(live.messages.size() == 6);
  CHECK(live.rating->empathy == 5);

  ChatService fresh(config_in(dir), nullptr, llm);
  const auto reloaded = fresh.get_session(created.session_id);
  CHECK(reloaded == live);
  CHECK(fresh.store().load(created.session_id).session == live);
}

TEST_CASE("a failed reply leaves the user message with a failure marker") {
  TempDir dir;
  auto llm = std::make_shared<CountingLlm>();
  ChatService svc(config_in(dir), nullptr, llm);
  const auto id = svc.create_session("Bo").session_id;
  llm->fail = true;
  try {
    svc.send_message(id, "are you there?");
    FAIL("expected LlmUnavailable");
  } catch (const ChatError& e) {
    CHECK(e.kind() == ChatError::Kind::kLlmUnavailable);
  }
  const auto s = svc.store().load(id).session;
  REQUIRE(s.messages.size() == 3);
  CHECK(s.messages[2].text == "are you there?");
  CHECK(s.messages[2].failure == std::optional<std::string>("LlmUnavailable"));
  CHECK(svc.get_session(id) == s);

  llm->fail = false;
  CHECK(svc.send_message(id, "retry") == "reply to 4 turns: retry");
}

TEST_CASE("invalid input") {
  TempDir dir;
  ChatService svc(config_in(dir), nullptr, std::make_shared<CountingLlm>());
  const auto id = svc.create_session("").session_id;
  auto kind = [](auto&& f) {
    try {
      f();
    } catch (const ChatError& e) {
      return e.kind();
    }
    FAIL("expected ChatError");
    return ChatError::Kind::kStorage;
  };
  CHECK(kind([&] { svc.send_message(id, "  "); }) == ChatError::Kind::kInvalidInput);
  CHECK(kind([&] { svc.rate_session(id, 0, 3, ""); }) == ChatError::Kind::kInvalidInput);
  CHECK(kind([&] { svc.rate_session(id, 3, 6, ""); }) == ChatError::Kind::kInvalidInput);
  CHECK(kind([&] { svc.send_message("missing", "hi"); }) == ChatError::Kind::kSessionNotFound);
  CHECK(kind([&] { svc.get_session("../etc/passwd"); }) == ChatError::Kind::kSessionNotFound);
  CHECK_THROWS_AS(ChatService(config_in(dir), nullptr, nullptr), ChatError);
}

TEST_CASE("concurrent sessions replay to their in-memory histories") {
  TempDir dir;
  MockLlm mock;
  LlmEndpointConfig cfg;
  cfg.base_url = mock.base_url();
  ChatService svc(config_in(dir), nullptr, std::make_shared<HttpLlmClient>(cfg));
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) ids.push_back(svc.create_session("U" + std::to_string(i)).session_id);
  std::vector<std::thread> threads;
  for (int t = 0; t < 12; ++t) {
    threads.emplace_back([&, t] {
      for (int k = 0; k < 5; ++k) svc.send_message(ids[(t + k) % ids.size()], "m" + std::to_string(t));
    });
  }
  for (auto& th : threads) th.join();
  size_t total = 0;
  for (const auto& id : ids) {
    const auto live = svc.get_session(id);
    CHECK(svc.store().load(id).session == live);
    for (size_t i = 2; i < live.messages.size(); ++i) {
      CHECK(live.messages[i].role == (i % 2 == 0 ? "user" : "assistant"));
    }
    total += live.messages.size() - 2;
  }
  CHECK(total == 12 * 5 * 2);
}

TEST_CASE("the prompt carries the monitor's summary unchanged") {
  TempDir dir;
  ArchOptions opt;
  opt.filters = {2, 2, 2};
  opt.hidden = 4;
  auto model = std::make_shared<const StressNetParams>(
      build_network(make_arch({{"eda", 4.0}, {"temp", 4.0}}, 60, opt), 1));
  auto monitor = std::make_shared<StressMonitor>(model);
  ChatService svc(config_in(dir), monitor, std::make_shared<CountingLlm>());
  for (const char* ch : {"eda", "temp"}) {
    std::vector<TimedSample> b;
    for (int k = 0; k <= 4 * 120; ++k) b.emplace_back(k * 0.25, 1.0);
    svc.push_signals(ch, b);
  }
  const auto summary = svc.stress_summary();
  CHECK(summary.windows_total > 0);
  CHECK(summary == monitor->summary());
  const auto s = svc.create_session("Dee");
  CHECK(s.context.summary == public_summary(summary));
  CHECK(s.messages[0].text == build_system_prompt(s.context));
}
