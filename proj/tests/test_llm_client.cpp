#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "emllm/llm_client.hpp"
#include "support.hpp"

using namespace emllm;
using testing_support::MockLlm;

namespace {

LlmEndpointConfig config_for(const MockLlm& mock) {
  LlmEndpointConfig cfg;
  cfg.base_url = mock.base_url();
  cfg.model = "test-model";
  cfg.timeout_s = 5;
  return cfg;
}

ChatError::Kind failure_kind(HttpLlmClient& client) {
  try {
    client.complete({{"user", "hi"}});
  } catch (const ChatError& e) {
    return e.kind();
  }
  FAIL("expected ChatError");
  return ChatError::Kind::kStorage;
}

}  // namespace

TEST_CASE("request body and response parsing") {
  LlmEndpointConfig cfg;
  cfg.model = "m";
  cfg.temperature = 0.25;
  const auto body = completion_request_body(cfg, {{"system", "S"}, {"user", "U"}});
  CHECK(body.at("model") == "m");
  CHECK(body.at("temperature") == 0.25);
  REQUIRE(body.at("messages").size() == 2);
  CHECK(body.at("messages")[0].at("role") == "system");
  CHECK(body.at("messages")[1].at("content") == "U");
  CHECK(parse_completion_response(R"({"choices":[{"message":{"content":"yo"}}]})") == "yo");
  CHECK_THROWS_AS(parse_completion_response(R"({"choices":[]})"), ChatError);
}

TEST_CASE("successful completion sends the key only as a header") {
  MockLlm mock;
  mock.set_fallback("ok");
  auto cfg = config_for(mock);
  cfg.api_key = "sk-unit-test-key";
  HttpLlmClient client(cfg);
  CHECK(client.complete({{"system", "persona"}, {"user", "hello"}}) == "ok");
  REQUIRE(mock.requests() == 1);
  CHECK(mock.auth_headers()[0] == "Bearer sk-unit-test-key");
  CHECK(mock.bodies()[0].find("sk-unit-test-key") == std::string::npos);
  const auto sent = nlohmann::json::parse(mock.bodies()[0]);
  CHECK(sent.at("messages")[0].at("content") == "persona");
  CHECK(cfg.redacted().dump().find("sk-unit-test-key") == std::string::npos);
}

TEST_CASE("transient failures are retried with exponential backoff") {
  MockLlm mock;
  mock.script({{500, ""}, {500, ""}, {200, "fine"}});
  HttpLlmClient client(config_for(mock));
  std::vector<double> sleeps;
  client.set_sleeper([&](double s) { sleeps.push_back(s); });
  CHECK(client.complete({{"user", "hi"}}) == "fine");
  CHECK(mock.requests() == 3);
  CHECK(sleeps == std::vector<double>{0.5, 1.0});
}

TEST_CASE("persistent 500s give up after max_retries + 1 requests") {
  for (int retries : {0, 2, 4}) {
    MockLlm mock;
    mock.script(std::vector<MockLlm::Reply>(10, {500, ""}));
    auto cfg = config_for(mock);
    cfg.max_retries = retries;
    HttpLlmClient client(cfg);
    client.set_sleeper([](double) {});
    CHECK(failure_kind(client) == ChatError::Kind::kLlmUnavailable);
    CHECK(mock.requests() == static_cast<size_t>(retries + 1));
  }
}

TEST_CASE("429 is retried, other 4xx are not") {
  MockLlm mock;
  mock.script({{429, ""}, {200, "after 429"}});
  HttpLlmClient client(config_for(mock));
  client.set_sleeper([](double) {});
  CHECK(client.complete({{"user", "x"}}) == "after 429");

  MockLlm rejecting;
  rejecting.script({{400, ""}, {200, "never"}});
  HttpLlmClient strict(config_for(rejecting));
  strict.set_sleeper([](double) {});
  CHECK(failure_kind(strict) == ChatError::Kind::kLlmRejected);
  CHECK(rejecting.requests() == 1);
}

TEST_CASE("unreachable endpoint and timeouts") {
  int free_port = 0;
  {
    MockLlm probe;
    free_port = probe.port();
  }
  LlmEndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(free_port) + "/v1";
  cfg.timeout_s = 2;
  HttpLlmClient down(cfg);
  int sleeps = 0;
  down.set_sleeper([&](double) { ++sleeps; });
  CHECK(failure_kind(down) == ChatError::Kind::kLlmUnavailable);
  CHECK(sleeps == 2);

  MockLlm slow;
  slow.script({{200, "late", 1.5}, {200, "late", 1.5}});
  auto scfg = config_for(slow);
  scfg.timeout_s = 0.4;
  scfg.max_retries = 1;
  HttpLlmClient client(scfg);
  client.set_sleeper([](double) {});
  CHECK(failure_kind(client) == ChatError::Kind::kTimeout);
}

TEST_CASE("configuration") {
  LlmEndpointConfig tls;
  tls.base_url = "https://example.com/v1";
  CHECK_THROWS_AS(HttpLlmClient{tls}, ChatError);
  LlmEndpointConfig bare;
  bare.base_url = "example.com";
  CHECK_THROWS_AS(HttpLlmClient{bare}, ChatError);
  setenv("EMLLM_LLM_URL", "http://10.0.0.1:9/v1", 1);
  setenv("EMLLM_LLM_MODEL", "env-model", 1);
  setenv("EMLLM_LLM_KEY", "env-key", 1);
  const auto cfg = llm_config_from_env();
  CHECK(cfg.base_url == "http://10.0.0.1:9/v1");
  CHECK(cfg.model == "env-model");
  CHECK(cfg.api_key == "env-key");
  CHECK(cfg.timeout_s == 60);
  CHECK(cfg.max_retries == 2);
  CHECK(cfg.temperature == 0.7);
  unsetenv("EMLLM_LLM_URL");
  unsetenv("EMLLM_LLM_MODEL");
  unsetenv("EMLLM_LLM_KEY");
}
