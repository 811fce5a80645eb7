#include "emllm/http_api.hpp"

#include <httplib.h>

#include "emllm/json_io.hpp"

namespace emllm {

using json = nlohmann::json;

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& kind,
                 const std::string& detail) {
  reply_json(res, status, {{"error", kind}, {"detail", detail}});
}

int status_for(ChatError::Kind kind) {
  switch (kind) {
    case ChatError::Kind::kLlmUnavailable: return 502;
    case ChatError::Kind::kLlmRejected: return 502;
    case ChatError::Kind::kTimeout: return 504;
    case ChatError::Kind::kSessionNotFound: return 404;
    case ChatError::Kind::kInvalidInput: return 400;
    case ChatError::Kind::kStorage: return 500;
  }
  return 500;
}

int status_for(StreamError::Kind kind) {
  switch (kind) {
    case StreamError::Kind::kOutOfOrder: return 409;
    case StreamError::Kind::kUnknownChannel: return 400;
    case StreamError::Kind::kInvalidSample: return 400;
    case StreamError::Kind::kClosed: return 409;
  }
  return 400;
}

// Runs a handler, mapping the library's exceptions onto HTTP errors.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const ChatError& e) {
    reply_error(res, status_for(e.kind()), to_string(e.kind()), e.what());
  } catch (const StreamError& e) {
    reply_error(res, status_for(e.kind()), to_string(e.kind()), e.what());
  } catch (const json::exception& e) {
    reply_error(res, 400, "BadRequest", e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, "Internal", e.what());
  }
}

json parse_body(const httplib::Request& req) {
  auto j = json::parse(req.body);
  if (!j.is_object()) throw ChatError(ChatError::Kind::kInvalidInput, "body must be a JSON object");
  return j;
}

}  // namespace

std::pair<std::string, int> parse_bind_addr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) {
    throw ChatError(ChatError::Kind::kInvalidInput, "bind address must be host:port");
  }
  try {
    const int port = std::stoi(addr.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    return {addr.substr(0, colon), port};
  } catch (const std::exception&) {
    throw ChatError(ChatError::Kind::kInvalidInput, "bad port in bind address " + addr);
  }
}

ApiServer::ApiServer(ChatService& service, ApiOptions options)
    : service_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::install_routes() {
  auto& srv = *server_;

  srv.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    reply_json(res, 200, {{"status", "ok"}});
  });

  srv.Post("/api/session", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = req.body.empty() ? json::object() : parse_body(req);
      const auto name = body.value("user_name", std::string());
      const auto session = service_.create_session(name);
      reply_json(res, 200,
                 {{"session_id", session.session_id}, {"greeting", session.messages.back().text}});
    });
  });

  srv.Get(R"(/api/session/([A-Za-z0-9_-]+))",
          [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
              reply_json(res, 200, session_to_json(service_.get_session(req.matches[1])));
            });
          });

  srv.Post(R"(/api/session/([A-Za-z0-9_-]+)/message)",
           [this](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               const auto body = parse_body(req);
               if (!body.contains("text") || !body.at("text").is_string()) {
                 throw ChatError(ChatError::Kind::kInvalidInput, "missing text");
               }
               const auto reply = service_.send_message(req.matches[1], body.at("text"));
               reply_json(res, 200, {{"assistant_text", reply}});
             });
           });

  srv.Post(R"(/api/session/([A-Za-z0-9_-]+)/rating)",
           [this](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               const auto body = parse_body(req);
               service_.rate_session(req.matches[1], body.at("quality").get<int>(),
                                     body.at("empathy").get<int>(),
                                     body.value("comment", std::string()));
               res.status = 204;
             });
           });

  srv.Post("/api/signals/push", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req);
      const auto channel = body.at("channel").get<std::string>();
      std::vector<TimedSample> samples;
      for (const auto& s : body.at("samples")) {
        if (!s.is_array() || s.size() != 2) {
          throw ChatError(ChatError::Kind::kInvalidInput, "samples are [t_s, value] pairs");
        }
        samples.emplace_back(s[0].get<double>(), s[1].get<double>());
      }
      reply_json(res, 200, {{"accepted", service_.push_signals(channel, samples)}});
    });
  });

  srv.Get("/api/stress/summary", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply_json(res, 200, json(service_.stress_summary())); });
  });

  if (options_.static_dir) srv.set_mount_point("/", options_.static_dir->string());
}

bool ApiServer::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }

int ApiServer::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool ApiServer::listen() { return server_->listen_after_bind(); }

void ApiServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

bool ApiServer::running() const { return server_->is_running(); }

void ApiServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace emllm
