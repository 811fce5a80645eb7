#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "emllm/rng.hpp"
#include "emllm/signal_store.hpp"
#include "emllm/stress_net.hpp"

namespace testing_support {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "emllm") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> random_vector(emllm::Rng& rng, size_t n, double lo = -1.0,
                                         double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Window with random samples sized for the given architecture.
inline emllm::LabeledWindow random_window(emllm::Rng& rng, const emllm::ArchConfig& arch,
                                          int label) {
  emllm::LabeledWindow w;
  w.subject_id = "R";
  w.label = label;
  for (const auto& ch : arch.channels) {
    const auto n = emllm::samples_per_window(arch.window_s, ch.rate_hz);
    w.per_channel[ch.name] = random_vector(rng, n);
  }
  return w;
}

// A network with a handful of parameters per layer, for gradient checks.
inline emllm::ArchConfig small_arch(emllm::Rng& rng) {
  static const double kRates[] = {1.0, 2.0, 4.0};
  std::map<std::string, double> rates;
  const size_t n_channels = 1 + rng.below(3);
  const char* names[] = {"a", "b", "c"};
  for (size_t i = 0; i < n_channels; ++i) rates[names[i]] = kRates[rng.below(3)];
  emllm::ArchOptions opt;
  opt.filters = {1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(3)};
  opt.pool_size = 1 + rng.below(2);
  opt.pool_stride = opt.pool_size;
  opt.hidden = 2 + rng.below(4);
  const double window_s = 24.0 + static_cast<double>(rng.below(12));
  return emllm::make_arch(rates, window_s, opt);
}

// Scripted stand-in for a chat-completions endpoint. Each request pops the
// next scripted response; when the script is empty it echoes `fallback`.
class MockLlm {
 public:
  struct Reply {
    int status{200};
    std::string content;  // assistant text for 200, raw body otherwise
    double delay_s{0.0};
  };

  MockLlm() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                  httplib::Response& res) {
      Reply reply;
      {
        std::lock_guard<std::mutex> lock(mu_);
        bodies_.push_back(req.body);
        auth_.push_back(req.get_header_value("Authorization"));
        if (!script_.empty()) {
          reply = script_.front();
          script_.pop_front();
        } else {
          reply = {200, fallback_, 0.0};
        }
      }
      if (reply.delay_s > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(reply.delay_s));
      }
      res.status = reply.status;
      if (reply.status == 200) {
        nlohmann::json body{{"choices", {{{"message", {{"role", "assistant"},
                                                       {"content", reply.content}}}}}}};
        res.set_content(body.dump(), "application/json");
      } else {
        res.set_content(reply.content.empty() ? "{\"error\":\"scripted\"}" : reply.content,
                        "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockLlm() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int port() const { return port_; }

  void script(std::vector<Reply> replies) {
    std::lock_guard<std::mutex> lock(mu_);
    script_.assign(replies.begin(), replies.end());
  }
  void set_fallback(std::string text) {
    std::lock_guard<std::mutex> lock(mu_);
    fallback_ = std::move(text);
  }
  std::vector<std::string> bodies() const {
    std::lock_guard<std::mutex> lock(mu_);
    return bodies_;
  }
  std::vector<std::string> auth_headers() const {
    std::lock_guard<std::mutex> lock(mu_);
    return auth_;
  }
  size_t requests() const {
    std::lock_guard<std::mutex> lock(mu_);
    return bodies_.size();
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_{-1};
  mutable std::mutex mu_;
  std::deque<Reply> script_;
  std::string fallback_{"ok"};
  std::vector<std::string> bodies_;
  std::vector<std::string> auth_;
};

}  // namespace testing_support
