#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "emllm/chat_service.hpp"

namespace httplib {
class Server;
}

namespace emllm {

struct ApiOptions {
  // When set, files under this directory are served at "/" (the web client).
  std::optional<std::filesystem::path> static_dir;
};

// JSON API in front of a ChatService:
//   GET  /api/health                    POST /api/session
//   GET  /api/session/{id}              POST /api/session/{id}/message
//   POST /api/session/{id}/rating       POST /api/signals/push
//   GET  /api/stress/summary
class ApiServer {
 public:
  ApiServer(ChatService& service, ApiOptions options = {});
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Returns false when the address cannot be bound (e.g. port in use).
  bool bind(const std::string& host, int port);
  // Binds an ephemeral port and returns it, or -1.
  int bind_any_port(const std::string& host);
  // Blocks until stop().
  bool listen();
  void stop();
  bool running() const;
  void wait_until_ready() const;

 private:
  void install_routes();

  ChatService& service_;
  ApiOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

// "host:port" → (host, port); throws ChatError kInvalidInput.
std::pair<std::string, int> parse_bind_addr(const std::string& addr);

}  // namespace emllm
