#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emllm/stress_net.hpp"

namespace emllm {

struct PredictionRecord {
  double t_start_s{0.0};
  double t_end_s{0.0};
  double probability{0.0};
  int label{0};

  bool operator==(const PredictionRecord&) const = default;
};

struct Episode {
  double start_s{0.0};
  double end_s{0.0};
  size_t windows{0};

  bool operator==(const Episode&) const = default;
};

// A run of consecutive stressed records at one edge of a summary; kept so two
// summaries of adjacent record lists can be merged.
struct EdgeRun {
  size_t windows{0};
  double start_s{0.0};
  double end_s{0.0};

  bool operator==(const EdgeRun&) const = default;
};

struct StressSummary {
  double period_start_s{0.0};
  double period_end_s{0.0};
  size_t windows_total{0};
  size_t windows_stressed{0};
  double stressed_fraction{0.0};
  std::vector<Episode> episodes;
  double peak_probability{0.0};

  EdgeRun head_run;
  EdgeRun tail_run;

  bool operator==(const StressSummary&) const = default;
};

inline constexpr size_t kDefaultMinEpisodeWindows = 3;

// Runs of at least min_episode_windows consecutive stressed records become
// episodes spanning first start to last end.
StressSummary summarize(std::span<const PredictionRecord> records,
                        size_t min_episode_windows = kDefaultMinEpisodeWindows);

// summarize(a ++ b) == merge_summaries(summarize(a), summarize(b)).
StressSummary merge_summaries(const StressSummary& a, const StressSummary& b,
                              size_t min_episode_windows = kDefaultMinEpisodeWindows);

class StreamError : public std::runtime_error {
 public:
  enum class Kind { kOutOfOrder, kUnknownChannel, kInvalidSample, kClosed };

  StreamError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(StreamError::Kind kind);

using TimedSample = std::pair<double, double>;  // (t_s, value)

// Per-channel sample rings. Not synchronized; StressMonitor owns the lock.
class StreamBuffer {
 public:
  StreamBuffer(const std::map<std::string, double>& rates_hz);

  // Rejects the whole batch unless its timestamps strictly increase and the
  // first one is newer than the last accepted sample of that channel.
  size_t push(const std::string& channel, std::span<const TimedSample> batch);

  // Latest instant for which every channel has a sample.
  std::optional<double> watermark() const;
  // min over channels of (last timestamp + one sample period).
  std::optional<double> coverage_end() const;
  // Latest first-sample time across channels; the prediction grid starts here.
  std::optional<double> origin() const;

  std::optional<std::map<std::string, std::vector<double>>> extract(double t_start_s,
                                                                   double window_s) const;
  void evict_before(double t_s);

  size_t size(const std::string& channel) const;
  std::optional<double> oldest(const std::string& channel) const;

 private:
  struct Ring {
    double rate_hz{0.0};
    std::optional<double> first_ever;
    std::optional<double> last_accepted;
    std::deque<TimedSample> samples;
  };
  std::map<std::string, Ring> rings_;
};

struct MonitorConfig {
  double window_s{0.0};  // 0 takes the model's window length
  double shift_s{5.0};
  size_t min_episode_windows{kDefaultMinEpisodeWindows};
  double capacity_windows{3.0};  // samples older than watermark - 3 windows may go
};

// Buffers streamed samples and predicts every complete window on the grid
// origin + k * shift. A window [t, t + window) is complete once the
// watermark passes t + window, or, after finish(), once every channel covers it.
class StressMonitor {
 public:
  StressMonitor(std::shared_ptr<const StressNetParams> model, MonitorConfig config = {});

  size_t push_samples(const std::string& channel, std::span<const TimedSample> batch);
  std::vector<PredictionRecord> tick();
  // Marks end of stream and emits the windows that end exactly at the data end.
  std::vector<PredictionRecord> finish();

  StressSummary summary() const;
  std::vector<PredictionRecord> records() const;
  std::optional<double> watermark() const;
  size_t buffered(const std::string& channel) const;
  size_t skipped_windows() const;
  const MonitorConfig& config() const { return config_; }

 private:
  std::vector<PredictionRecord> tick_locked();

  std::shared_ptr<const StressNetParams> model_;
  MonitorConfig config_;
  mutable std::mutex mu_;
  StreamBuffer buffer_;
  Workspace workspace_;
  std::vector<PredictionRecord> records_;
  size_t next_k_{0};
  size_t skipped_{0};
  bool closed_{false};
};

}  // namespace emllm
