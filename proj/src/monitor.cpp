#include "emllm/monitor.hpp"

#include <algorithm>
#include <cmath>

namespace emllm {

namespace {

constexpr double kTimeEps = 1e-9;

EdgeRun make_run(std::span<const PredictionRecord> records, size_t first, size_t last) {
  return EdgeRun{last - first + 1, records[first].t_start_s, records[last].t_end_s};
}

}  // namespace

StressSummary summarize(std::span<const PredictionRecord> records, size_t min_episode_windows) {
  StressSummary s;
  if (records.empty()) return s;
  s.period_start_s = records.front().t_start_s;
  s.period_end_s = records.back().t_end_s;
  s.windows_total = records.size();
  size_t run_start = 0;
  bool in_run = false;
  for (size_t i = 0; i <= records.size(); ++i) {
    const bool stressed = i < records.size() && records[i].label == 1;
    if (i < records.size()) {
      if (stressed) ++s.windows_stressed;
      s.peak_probability = std::max(s.peak_probability, records[i].probability);
    }
    if (stressed && !in_run) {
      run_start = i;
      in_run = true;
    } else if (!stressed && in_run) {
      in_run = false;
      const EdgeRun run = make_run(records, run_start, i - 1);
      if (run_start == 0) s.head_run = run;
      if (i == records.size()) s.tail_run = run;
      if (run.windows >= min_episode_windows) {
        s.episodes.push_back(Episode{run.start_s, run.end_s, run.windows});
      }
    }
  }
  s.stressed_fraction =
      static_cast<double>(s.windows_stressed) / static_cast<double>(s.windows_total);
  return s;
}

StressSummary merge_summaries(const StressSummary& a, const StressSummary& b,
                              size_t min_episode_windows) {
  if (a.windows_total == 0) return b;
  if (b.windows_total == 0) return a;

  StressSummary m;
  m.period_start_s = a.period_start_s;
  m.period_end_s = b.period_end_s;
  m.windows_total = a.windows_total + b.windows_total;
  m.windows_stressed = a.windows_stressed + b.windows_stressed;
  m.stressed_fraction =
      static_cast<double>(m.windows_stressed) / static_cast<double>(m.windows_total);
  m.peak_probability = std::max(a.peak_probability, b.peak_probability);

  const bool a_all = a.head_run.windows == a.windows_total;
  const bool b_all = b.head_run.windows == b.windows_total;
  m.head_run = a.head_run;
  m.tail_run = b.tail_run;

  if (a.tail_run.windows > 0 && b.head_run.windows > 0) {
    const EdgeRun joined{a.tail_run.windows + b.head_run.windows, a.tail_run.start_s,
                         b.head_run.end_s};
    auto ea = a.episodes;
    if (a.tail_run.windows >= min_episode_windows) ea.pop_back();
    m.episodes = std::move(ea);
    if (joined.windows >= min_episode_windows) {
      m.episodes.push_back(Episode{joined.start_s, joined.end_s, joined.windows});
    }
    const size_t skip_b = b.head_run.windows >= min_episode_windows ? 1 : 0;
    m.episodes.insert(m.episodes.end(), b.episodes.begin() + static_cast<long>(skip_b),
                      b.episodes.end());
    if (a_all) m.head_run = joined;
    if (b_all) m.tail_run = joined;
  } else {
    m.episodes = a.episodes;
    m.episodes.insert(m.episodes.end(), b.episodes.begin(), b.episodes.end());
  }
  return m;
}

const char* to_string(StreamError::Kind kind) {
  switch (kind) {
    case StreamError::Kind::kOutOfOrder: return "OutOfOrder";
    case StreamError::Kind::kUnknownChannel: return "UnknownChannel";
    case StreamError::Kind::kInvalidSample: return "InvalidSample";
    case StreamError::Kind::kClosed: return "Closed";
  }
  return "Unknown";
}

StreamBuffer::StreamBuffer(const std::map<std::string, double>& rates_hz) {
  for (const auto& [name, rate] : rates_hz) rings_[name].rate_hz = rate;
}

size_t StreamBuffer::push(const std::string& channel, std::span<const TimedSample> batch) {
  auto it = rings_.find(channel);
  if (it == rings_.end()) {
    throw StreamError(StreamError::Kind::kUnknownChannel, "unknown channel '" + channel + "'");
  }
  auto& ring = it->second;
  double last = ring.last_accepted.value_or(-INFINITY);
  for (const auto& [t, v] : batch) {
    if (!std::isfinite(t) || !std::isfinite(v)) {
      throw StreamError(StreamError::Kind::kInvalidSample, channel + ": non-finite sample");
    }
    if (!(t > last)) {
      throw StreamError(StreamError::Kind::kOutOfOrder,
                        channel + ": timestamp " + std::to_string(t) + " not after " +
                            std::to_string(last));
    }
    last = t;
  }
  if (batch.empty()) return 0;
  if (!ring.first_ever) ring.first_ever = batch.front().first;
  ring.last_accepted = batch.back().first;
  ring.samples.insert(ring.samples.end(), batch.begin(), batch.end());
  return batch.size();
}

std::optional<double> StreamBuffer::watermark() const {
  std::optional<double> wm;
  for (const auto& [name, ring] : rings_) {
    if (!ring.last_accepted) return std::nullopt;
    const double last = *ring.last_accepted;
    wm = wm ? std::min(*wm, last) : last;
  }
  return wm;
}

std::optional<double> StreamBuffer::coverage_end() const {
  std::optional<double> end;
  for (const auto& [name, ring] : rings_) {
    if (!ring.last_accepted) return std::nullopt;
    const double e = *ring.last_accepted + 1.0 / ring.rate_hz;
    end = end ? std::min(*end, e) : e;
  }
  return end;
}

std::optional<double> StreamBuffer::origin() const {
  std::optional<double> o;
  for (const auto& [name, ring] : rings_) {
    if (!ring.first_ever) return std::nullopt;
    o = o ? std::max(*o, *ring.first_ever) : *ring.first_ever;
  }
  return o;
}

std::optional<std::map<std::string, std::vector<double>>> StreamBuffer::extract(
    double t_start_s, double window_s) const {
  std::map<std::string, std::vector<double>> out;
  for (const auto& [name, ring] : rings_) {
    const size_t n = samples_per_window(window_s, ring.rate_hz);
    const double tol = 0.25 / ring.rate_hz;
    auto first = std::lower_bound(
        ring.samples.begin(), ring.samples.end(), t_start_s - tol,
        [](const TimedSample& s, double t) { return s.first < t; });
    if (first == ring.samples.end() || std::abs(first->first - t_start_s) > tol) {
      return std::nullopt;
    }
    if (static_cast<size_t>(ring.samples.end() - first) < n) return std::nullopt;
    const auto last = first + static_cast<long>(n - 1);
    const double expected_last = t_start_s + static_cast<double>(n - 1) / ring.rate_hz;
    if (std::abs(last->first - expected_last) > tol) return std::nullopt;  // gap
    std::vector<double> v;
    v.reserve(n);
    for (auto s = first; s <= last; ++s) v.push_back(s->second);
    out.emplace(name, std::move(v));
  }
  return out;
}

void StreamBuffer::evict_before(double t_s) {
  for (auto& [name, ring] : rings_) {
    while (!ring.samples.empty() && ring.samples.front().first < t_s) ring.samples.pop_front();
  }
}

size_t StreamBuffer::size(const std::string& channel) const {
  auto it = rings_.find(channel);
  return it == rings_.end() ? 0 : it->second.samples.size();
}

std::optional<double> StreamBuffer::oldest(const std::string& channel) const {
  auto it = rings_.find(channel);
  if (it == rings_.end() || it->second.samples.empty()) return std::nullopt;
  return it->second.samples.front().first;
}

namespace {

std::map<std::string, double> model_rates(const StressNetParams& model) {
  std::map<std::string, double> rates;
  for (const auto& ch : model.arch.channels) rates[ch.name] = ch.rate_hz;
  return rates;
}

}  // namespace

StressMonitor::StressMonitor(std::shared_ptr<const StressNetParams> model, MonitorConfig config)
    : model_(std::move(model)),
      config_(config),
      buffer_(model_rates(*model_)),
      workspace_(model_->layout) {
  if (config_.window_s == 0.0) config_.window_s = model_->arch.window_s;
  if (std::abs(config_.window_s - model_->arch.window_s) > kTimeEps) {
    throw ModelError(ModelError::Kind::kInvalidArgument,
                     "monitor window differs from the model's window");
  }
  if (!(config_.shift_s > 0.0)) {
    throw ModelError(ModelError::Kind::kInvalidArgument, "shift must be > 0");
  }
}

size_t StressMonitor::push_samples(const std::string& channel, std::span<const TimedSample> batch) {
  std::lock_guard<std::mutex> lock(mu_);
  if (closed_) throw StreamError(StreamError::Kind::kClosed, "stream already finished");
  return buffer_.push(channel, batch);
}

std::vector<PredictionRecord> StressMonitor::tick() {
  std::lock_guard<std::mutex> lock(mu_);
  return tick_locked();
}

std::vector<PredictionRecord> StressMonitor::finish() {
  std::lock_guard<std::mutex> lock(mu_);
  closed_ = true;
  return tick_locked();
}

std::vector<PredictionRecord> StressMonitor::tick_locked() {
  std::vector<PredictionRecord> fresh;
  const auto wm = buffer_.watermark();
  const auto origin = buffer_.origin();
  if (!wm || !origin) return fresh;
  const auto cover = buffer_.coverage_end();
  const double w = config_.window_s;

  for (;;) {
    const double t = *origin + static_cast<double>(next_k_) * config_.shift_s;
    const bool complete = t + w < *wm || (closed_ && cover && t + w <= *cover + kTimeEps);
    if (!complete) break;
    ++next_k_;
    auto slices = buffer_.extract(t, w);
    if (!slices) {
      ++skipped_;
      continue;
    }
    LabeledWindow window;
    window.t_start_s = t;
    window.per_channel = std::move(*slices);
    workspace_.load(*model_, window, true);
    const double p = workspace_.forward(*model_);
    PredictionRecord rec{t, t + w, p, p >= model_->arch.threshold ? 1 : 0};
    records_.push_back(rec);
    fresh.push_back(rec);
  }

  const double next_start = *origin + static_cast<double>(next_k_) * config_.shift_s;
  buffer_.evict_before(std::min(next_start, *wm - config_.capacity_windows * w));
  return fresh;
}

StressSummary StressMonitor::summary() const {
  std::lock_guard<std::mutex> lock(mu_);
  return summarize(records_, config_.min_episode_windows);
}

std::vector<PredictionRecord> StressMonitor::records() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_;
}

std::optional<double> StressMonitor::watermark() const {
  std::lock_guard<std::mutex> lock(mu_);
  return buffer_.watermark();
}

size_t StressMonitor::buffered(const std::string& channel) const {
  std::lock_guard<std::mutex> lock(mu_);
  return buffer_.size(channel);
}

size_t StressMonitor::skipped_windows() const {
  std::lock_guard<std::mutex> lock(mu_);
  return skipped_;
}

}  // namespace emllm
