#include "emllm/signal_store.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace emllm {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kTimeEps = 1e-9;
constexpr double kAlignEps = 1e-6;

std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw DataError(DataError::Kind::kMalformedRow, where + ": not a number: '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw DataError(DataError::Kind::kMalformedRow, where + ": not an integer: '" + s + "'");
  }
  return v;
}

std::ifstream open_required(const fs::path& path) {
  if (!fs::is_regular_file(path)) {
    throw DataError(DataError::Kind::kMissingFile, path.filename().string());
  }
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::kMissingFile, path.filename().string());
  return in;
}

// Reads a CSV with an exact header; calls on_row with the split fields.
template <typename OnRow>
void read_csv(const fs::path& path, const std::string& header, size_t n_fields, OnRow on_row) {
  auto in = open_required(path);
  const std::string name = path.filename().string();
  std::string line;
  if (!std::getline(in, line) || trim(line) != header) {
    throw DataError(DataError::Kind::kMalformedRow,
                    name + ": expected header '" + header + "'");
  }
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_commas(trim(line));
    const std::string where = name + ":" + std::to_string(line_no);
    if (fields.size() != n_fields) {
      throw DataError(DataError::Kind::kMalformedRow,
                      where + ": expected " + std::to_string(n_fields) + " fields");
    }
    on_row(fields, where);
  }
}

SignalChannel load_channel(const fs::path& path, const std::string& name, double rate_hz) {
  SignalChannel ch;
  ch.name = name;
  ch.rate_hz = rate_hz;
  std::vector<double> times;
  read_csv(path, "t_s,value", 2, [&](const std::vector<std::string>& f, const std::string& where) {
    const double t = parse_double(f[0], where);
    if (!times.empty() && !(t > times.back())) {
      throw DataError(DataError::Kind::kNonMonotonic, where + ": timestamp not increasing");
    }
    times.push_back(t);
    ch.samples.push_back(parse_double(f[1], where));
  });
  if (ch.samples.empty()) {
    throw DataError(DataError::Kind::kMalformedRow, path.filename().string() + ": no samples");
  }
  ch.t0_s = times.front();
  // Timestamps must sit on the uniform grid implied by the declared rate.
  const double half_period = 0.5 / rate_hz;
  for (size_t k = 0; k < times.size(); ++k) {
    const double expected = ch.t0_s + static_cast<double>(k) / rate_hz;
    if (std::abs(times[k] - expected) > half_period) {
      throw DataError(DataError::Kind::kRateMismatch,
                      path.filename().string() + ": sample " + std::to_string(k) + " at t=" +
                          std::to_string(times[k]) + " inconsistent with rate " +
                          std::to_string(rate_hz) + " Hz");
    }
  }
  return ch;
}

std::vector<ConditionLabel> load_labels(const fs::path& path) {
  std::vector<ConditionLabel> labels;
  read_csv(path, "t_start_s,t_end_s,condition", 3,
           [&](const std::vector<std::string>& f, const std::string& where) {
             ConditionLabel l;
             l.t_start_s = parse_double(f[0], where);
             l.t_end_s = parse_double(f[1], where);
             l.condition = parse_int(f[2], where);
             if (!(l.t_start_s < l.t_end_s)) {
               throw DataError(DataError::Kind::kMalformedInterval,
                               where + ": interval end must be after start");
             }
             labels.push_back(l);
           });
  std::sort(labels.begin(), labels.end(),
            [](const auto& a, const auto& b) { return a.t_start_s < b.t_start_s; });
  for (size_t i = 1; i < labels.size(); ++i) {
    if (labels[i].t_start_s < labels[i - 1].t_end_s - kTimeEps) {
      throw DataError(DataError::Kind::kMalformedInterval,
                      path.filename().string() + ": overlapping intervals");
    }
  }
  return labels;
}

const ConditionLabel* find_enclosing(const std::vector<ConditionLabel>& sorted, double t0,
                                     double t1) {
  auto it = std::upper_bound(sorted.begin(), sorted.end(), t0 + kTimeEps,
                             [](double t, const ConditionLabel& l) { return t < l.t_start_s; });
  if (it == sorted.begin()) return nullptr;
  --it;
  if (t0 >= it->t_start_s - kTimeEps && t1 <= it->t_end_s + kTimeEps) return &*it;
  return nullptr;
}

}  // namespace

const char* to_string(DataError::Kind kind) {
  switch (kind) {
    case DataError::Kind::kMissingFile: return "MissingFile";
    case DataError::Kind::kMalformedRow: return "MalformedRow";
    case DataError::Kind::kMalformedInterval: return "MalformedInterval";
    case DataError::Kind::kNonMonotonic: return "NonMonotonic";
    case DataError::Kind::kRateMismatch: return "RateMismatch";
    case DataError::Kind::kNonIntegralSamples: return "NonIntegralSamples";
    case DataError::Kind::kEmptyInput: return "EmptyInput";
    case DataError::Kind::kUnknownChannel: return "UnknownChannel";
    case DataError::Kind::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Recording load_recording(const fs::path& dir) {
  auto meta_in = open_required(dir / "meta.json");
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::exception& e) {
    throw DataError(DataError::Kind::kMalformedRow, std::string("meta.json: ") + e.what());
  }

  Recording rec;
  try {
    rec.subject_id = meta.at("subject_id").get<std::string>();
    const auto labels_file = meta.at("labels_file").get<std::string>();
    const auto& channels = meta.at("channels");
    if (!channels.is_array() || channels.empty()) {
      throw DataError(DataError::Kind::kMalformedRow, "meta.json: no channels declared");
    }
    // Validate presence of every file before parsing any of them.
    for (const auto& c : channels) open_required(dir / c.at("file").get<std::string>());
    open_required(dir / labels_file);

    for (const auto& c : channels) {
      const auto name = c.at("name").get<std::string>();
      const double rate = c.at("rate_hz").get<double>();
      if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw DataError(DataError::Kind::kMalformedRow, "meta.json: rate_hz must be positive");
      }
      for (const auto& existing : rec.channels) {
        if (existing.name == name) {
          throw DataError(DataError::Kind::kMalformedRow, "meta.json: duplicate channel " + name);
        }
      }
      rec.channels.push_back(load_channel(dir / c.at("file").get<std::string>(), name, rate));
    }
    rec.labels = load_labels(dir / labels_file);
  } catch (const json::exception& e) {
    throw DataError(DataError::Kind::kMalformedRow, std::string("meta.json: ") + e.what());
  }
  std::sort(rec.channels.begin(), rec.channels.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });
  return rec;
}

bool is_usable_condition(int condition) { return condition >= 1 && condition <= 3; }

size_t samples_per_window(double window_s, double rate_hz) {
  const double n = window_s * rate_hz;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > kAlignEps) {
    throw DataError(DataError::Kind::kNonIntegralSamples,
                    "window of " + std::to_string(window_s) + " s at " + std::to_string(rate_hz) +
                        " Hz is not a whole number of samples");
  }
  return static_cast<size_t>(r);
}

std::map<std::string, std::vector<double>> slice_channels(
    const std::vector<SignalChannel>& channels, double t_start_s, double window_s) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& ch : channels) {
    const size_t n = samples_per_window(window_s, ch.rate_hz);
    const double offset = (t_start_s - ch.t0_s) * ch.rate_hz;
    const double idx = std::round(offset);
    if (std::abs(offset - idx) > kAlignEps) {
      throw DataError(DataError::Kind::kNonIntegralSamples,
                      ch.name + ": window start " + std::to_string(t_start_s) +
                          " s is not on the sample grid");
    }
    if (idx < 0.0 || static_cast<size_t>(idx) + n > ch.samples.size()) {
      throw DataError(DataError::Kind::kInvalidArgument,
                      ch.name + ": window exceeds recorded samples");
    }
    const auto first = ch.samples.begin() + static_cast<std::ptrdiff_t>(idx);
    out.emplace(ch.name, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(n)));
  }
  return out;
}

std::vector<LabeledWindow> segment_windows(const std::string& subject_id,
                                           const std::vector<SignalChannel>& channels,
                                           const std::vector<ConditionLabel>& labels,
                                           double window_s, double shift_s) {
  if (!(shift_s > 0.0)) throw DataError(DataError::Kind::kInvalidArgument, "shift must be > 0");
  if (channels.empty()) throw DataError(DataError::Kind::kEmptyInput, "no channels");
  for (const auto& ch : channels) samples_per_window(window_s, ch.rate_hz);

  auto sorted = labels;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.t_start_s < b.t_start_s; });

  double origin = channels.front().t0_s;
  double data_end = channels.front().end_s();
  for (const auto& ch : channels) {
    origin = std::max(origin, ch.t0_s);
    data_end = std::min(data_end, ch.end_s());
  }

  std::vector<LabeledWindow> windows;
  for (size_t k = 0;; ++k) {
    const double t = origin + static_cast<double>(k) * shift_s;
    if (t + window_s > data_end + kTimeEps) break;
    const auto* label = find_enclosing(sorted, t, t + window_s);
    if (label == nullptr || !is_usable_condition(label->condition)) continue;
    LabeledWindow w;
    w.subject_id = subject_id;
    w.t_start_s = t;
    w.per_channel = slice_channels(channels, t, window_s);
    w.label = label->condition == static_cast<int>(Condition::kStress) ? 1 : 0;
    windows.push_back(std::move(w));
  }
  return windows;
}

NormStats fit_norm_stats(const std::vector<const LabeledWindow*>& windows) {
  if (windows.empty()) throw DataError(DataError::Kind::kEmptyInput, "no training windows");
  std::map<std::string, std::pair<double, size_t>> sums;
  for (const auto* w : windows) {
    for (const auto& [name, v] : w->per_channel) {
      auto& [s, n] = sums[name];
      for (double x : v) s += x;
      n += v.size();
    }
  }
  NormStats stats;
  for (const auto& [name, sn] : sums) {
    const double mean = sn.first / static_cast<double>(sn.second);
    double ss = 0.0;
    for (const auto* w : windows) {
      auto it = w->per_channel.find(name);
      if (it == w->per_channel.end()) continue;
      for (double x : it->second) ss += (x - mean) * (x - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(sn.second));
    stats.channels[name] = ChannelStats{mean, std::max(sd, kMinStddev)};
  }
  return stats;
}

NormStats fit_norm_stats(const std::vector<LabeledWindow>& windows) {
  std::vector<const LabeledWindow*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  return fit_norm_stats(ptrs);
}

namespace {

template <typename F>
LabeledWindow map_samples(const LabeledWindow& window, const NormStats& stats, F f) {
  LabeledWindow out = window;
  for (auto& [name, v] : out.per_channel) {
    auto it = stats.channels.find(name);
    if (it == stats.channels.end()) {
      throw DataError(DataError::Kind::kUnknownChannel, "no normalization stats for " + name);
    }
    for (double& x : v) x = f(x, it->second);
  }
  return out;
}

}  // namespace

LabeledWindow normalize(const LabeledWindow& window, const NormStats& stats) {
  return map_samples(window, stats,
                     [](double x, const ChannelStats& s) { return (x - s.mean) / s.stddev; });
}

LabeledWindow denormalize(const LabeledWindow& window, const NormStats& stats) {
  return map_samples(window, stats,
                     [](double x, const ChannelStats& s) { return x * s.stddev + s.mean; });
}

}  // namespace emllm
