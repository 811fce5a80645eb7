#include "emllm/synthgen.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "emllm/rng.hpp"
#include "parallel.hpp"

namespace emllm {

namespace fs = std::filesystem;

namespace {

constexpr double kPulseHz = 1.2;
constexpr double kBvpAmplitude = 50.0;
constexpr double kSkinTemp = 33.0;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<ConditionLabel> tile(double duration_s, const std::vector<double>& fractions,
                                 const std::vector<int>& codes) {
  std::vector<ConditionLabel> out;
  double start = 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < fractions.size(); ++i) {
    acc += fractions[i];
    const double end = i + 1 == fractions.size() ? duration_s : std::round(acc * duration_s);
    if (end > start) out.push_back({start, end, codes[i]});
    start = end;
  }
  return out;
}

// Condition active at time t (intervals validated to tile the duration).
int condition_at(const std::vector<ConditionLabel>& intervals, double t) {
  for (const auto& l : intervals) {
    if (t >= l.t_start_s && t < l.t_end_s) return l.condition;
  }
  return intervals.back().condition;
}

void write_csv(const fs::path& path, const std::string& header, const SignalChannel& ch) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataError::Kind::kInvalidArgument, "cannot write " + path.string());
  out << header << '\n';
  for (size_t k = 0; k < ch.samples.size(); ++k) {
    out << format_number(ch.t0_s + static_cast<double>(k) / ch.rate_hz) << ','
        << format_number(ch.samples[k]) << '\n';
  }
  if (!out) throw DataError(DataError::Kind::kInvalidArgument, "failed writing " + path.string());
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<ConditionLabel> default_protocol(double duration_s) {
  return tile(duration_s, {0.25, 0.20, 0.15, 0.20, 0.20}, {1, 2, 3, 2, 1});
}

std::vector<ConditionLabel> calm_protocol(double duration_s) {
  return tile(duration_s, {0.4, 0.3, 0.3}, {1, 3, 1});
}

void validate_scenario(const ScenarioSpec& spec) {
  auto bad = [](const std::string& msg) {
    throw DataError(DataError::Kind::kInvalidArgument, "scenario: " + msg);
  };
  if (!(spec.duration_s > 0.0)) bad("duration must be positive");
  if (!(spec.bvp_rate_hz > 0.0 && spec.eda_rate_hz > 0.0 && spec.temp_rate_hz > 0.0)) {
    bad("rates must be positive");
  }
  if (spec.intervals.empty()) bad("no intervals");
  double cursor = 0.0;
  for (const auto& l : spec.intervals) {
    if (!(l.t_start_s < l.t_end_s)) bad("interval end must be after start");
    if (std::abs(l.t_start_s - cursor) > 1e-9) bad("intervals must tile [0, duration) in order");
    if (!is_usable_condition(l.condition)) bad("condition must be 1, 2 or 3");
    cursor = l.t_end_s;
  }
  if (std::abs(cursor - spec.duration_s) > 1e-9) bad("intervals must end at the duration");
}

Recording synthesize(const ScenarioSpec& spec) {
  validate_scenario(spec);
  Rng rng(spec.seed);
  // Per-subject physiology, drawn first so it does not depend on duration.
  const double eda_base = rng.uniform(1.8, 2.4);
  const double eda_drift_period = rng.uniform(300.0, 900.0);
  const double eda_drift_phase = rng.uniform(0.0, kTwoPi);
  const double pulse_offset = rng.uniform(-0.05, 0.05);
  const double temp_base = kSkinTemp + rng.uniform(-0.3, 0.3);
  const double temp_drift_phase = rng.uniform(0.0, kTwoPi);

  Recording rec;
  rec.subject_id = spec.subject_id;
  rec.labels = spec.intervals;

  auto make = [&](const std::string& name, double rate) {
    SignalChannel ch;
    ch.name = name;
    ch.rate_hz = rate;
    ch.t0_s = 0.0;
    ch.samples.resize(static_cast<size_t>(std::llround(spec.duration_s * rate)));
    return ch;
  };

  SignalChannel bvp = make("bvp", spec.bvp_rate_hz);
  double phase = 0.0;
  for (size_t k = 0; k < bvp.samples.size(); ++k) {
    const double t = static_cast<double>(k) / bvp.rate_hz;
    const bool stressed = condition_at(spec.intervals, t) == 2;
    const double f = kPulseHz + pulse_offset + (stressed ? spec.bvp_freq_shift : 0.0);
    bvp.samples[k] = kBvpAmplitude * std::sin(phase) + spec.bvp_noise * rng.normal();
    phase = std::fmod(phase + kTwoPi * f / bvp.rate_hz, kTwoPi);
  }

  SignalChannel eda = make("eda", spec.eda_rate_hz);
  for (size_t k = 0; k < eda.samples.size(); ++k) {
    const double t = static_cast<double>(k) / eda.rate_hz;
    const bool stressed = condition_at(spec.intervals, t) == 2;
    const double drift = spec.eda_drift * std::sin(kTwoPi * t / eda_drift_period + eda_drift_phase);
    eda.samples[k] = eda_base + drift + (stressed ? spec.eda_shift : 0.0) +
                     spec.eda_noise * rng.normal();
  }

  SignalChannel temp = make("temp", spec.temp_rate_hz);
  for (size_t k = 0; k < temp.samples.size(); ++k) {
    const double t = static_cast<double>(k) / temp.rate_hz;
    const bool stressed = condition_at(spec.intervals, t) == 2;
    const double drift = 0.1 * std::sin(kTwoPi * t / 1800.0 + temp_drift_phase);
    temp.samples[k] = temp_base + drift + (stressed ? spec.temp_shift : 0.0) +
                      spec.temp_noise * rng.normal();
  }

  rec.channels = {std::move(bvp), std::move(eda), std::move(temp)};
  return rec;
}

void write_recording(const Recording& rec, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DataError(DataError::Kind::kInvalidArgument, "cannot create " + dir.string());
  }
  nlohmann::json channels = nlohmann::json::array();
  for (const auto& ch : rec.channels) {
    channels.push_back({{"name", ch.name}, {"rate_hz", ch.rate_hz}, {"file", ch.name + ".csv"}});
    write_csv(dir / (ch.name + ".csv"), "t_s,value", ch);
  }
  nlohmann::json meta = {
      {"subject_id", rec.subject_id}, {"channels", channels}, {"labels_file", "labels.csv"}};
  {
    std::ofstream out(dir / "meta.json", std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(DataError::Kind::kInvalidArgument, "cannot write meta.json");
    out << meta.dump(2) << '\n';
  }
  std::ofstream labels(dir / "labels.csv", std::ios::binary | std::ios::trunc);
  if (!labels) throw DataError(DataError::Kind::kInvalidArgument, "cannot write labels.csv");
  labels << "t_start_s,t_end_s,condition\n";
  for (const auto& l : rec.labels) {
    labels << format_number(l.t_start_s) << ',' << format_number(l.t_end_s) << ',' << l.condition
           << '\n';
  }
  if (!labels) throw DataError(DataError::Kind::kInvalidArgument, "failed writing labels.csv");
}

void generate(const ScenarioSpec& spec, const fs::path& dir) {
  write_recording(synthesize(spec), dir);
}

void generate_all(const std::vector<ScenarioSpec>& specs, const fs::path& root) {
  detail::ExceptionSlot err;
  const long long n = static_cast<long long>(specs.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    err.run([&] {
      const auto& s = specs[static_cast<size_t>(i)];
      generate(s, root / s.subject_id);
    });
  }
  err.rethrow();
}

}  // namespace emllm
