#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "emllm/session.hpp"
#include "support.hpp"

using namespace emllm;
using testing_support::TempDir;

namespace {

ChatSession five_message_session() {
  ChatSession s;
  s.session_id = "abc123";
  s.created_at_ms = 1700000000000;
  StressSummary sum;
  sum.windows_total = 40;
  sum.windows_stressed = 12;
  sum.stressed_fraction = 0.3;
  sum.period_end_s = 255;
  sum.episodes = {{10, 80, 3}};
  sum.peak_probability = 0.875;
  s.context = make_prompt_context("Alice", sum);
  s.messages = {{"system", build_system_prompt(s.context), 1, {}},
                {"assistant", greeting(s.context), 1, {}},
                {"user", "I had a rough morning.", 2, {}},
                {"assistant", "I'm sorry to hear that. \"What\" happened?\n", 3, {}},
                {"user", "Meetings, ünïcode and all.", 4, {}}};
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("persist then load round-trips") {
  TempDir dir;
  SessionStore store(dir.path());
  auto s = five_message_session();
  s.rating = SessionRating{4, 5, "helpful", 9};
  s.messages[4].failure = "LlmUnavailable";
  store.persist(s);
  const auto loaded = store.load(s.session_id);
  CHECK(!loaded.truncated);
  CHECK(loaded.session == s);
  CHECK(session_to_json(loaded.session).dump() == session_to_json(s).dump());
}

TEST_CASE("a truncated final line loses only that event") {
  TempDir dir;
  SessionStore store(dir.path());
  const auto s = five_message_session();
  store.persist(s);
  auto text = slurp(store.path_for(s.session_id));
  text.resize(text.size() - 10);  // cut into the last message line
  std::ofstream(store.path_for(s.session_id), std::ios::binary | std::ios::trunc) << text;
  const auto loaded = store.load(s.session_id);
  CHECK(loaded.truncated);
  CHECK(!loaded.warning.empty());
  CHECK(loaded.session.messages.size() == 4);
  CHECK(loaded.valid_lines == 5);
}

TEST_CASE("a corrupt middle line stops the replay there") {
  TempDir dir;
  SessionStore store(dir.path());
  const auto s = five_message_session();
  store.persist(s);
  std::istringstream in(slurp(store.path_for(s.session_id)));
  std::string out, line;
  for (int i = 0; std::getline(in, line); ++i) out += (i == 3 ? "{garbage" : line) + "\n";
  std::ofstream(store.path_for(s.session_id), std::ios::binary | std::ios::trunc) << out;
  const auto loaded = store.load(s.session_id);
  CHECK(loaded.truncated);
  CHECK(loaded.session.messages.size() == 2);
}

TEST_CASE("appends build the same log as persist") {
  TempDir dir;
  SessionStore store(dir.path());
  auto s = five_message_session();
  s.session_id = "appended";
  store.append_created(s);
  for (const auto& m : s.messages) store.append_message(s.session_id, m);
  store.append_failure(s.session_id, 4, "Timeout");
  store.append_rating(s.session_id, {3, 2, "", 10});
  const auto loaded = store.load(s.session_id);
  CHECK(loaded.session.messages.size() == 5);
  CHECK(loaded.session.messages[4].failure == std::optional<std::string>("Timeout"));
  CHECK(loaded.session.rating->quality == 3);
}

TEST_CASE("session ids and missing sessions") {
  CHECK(valid_session_id("a1-B_2"));
  CHECK(!valid_session_id(""));
  CHECK(!valid_session_id("../etc"));
  CHECK(!valid_session_id(std::string(65, 'a')));
  TempDir dir;
  SessionStore store(dir.path());
  CHECK(!store.exists("nothing"));
  CHECK(!store.exists("../x"));
  try {
    store.load("nothing");
    FAIL("expected SessionNotFound");
  } catch (const ChatError& e) {
    CHECK(e.kind() == ChatError::Kind::kSessionNotFound);
  }
  CHECK_THROWS_AS(store.path_for("a/b"), ChatError);
}
