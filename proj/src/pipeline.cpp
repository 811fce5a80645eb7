#include "emllm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "emllm/rng.hpp"

namespace emllm {

namespace {

constexpr uint64_t kHoldoutStream = 0x4013d0cafeULL;

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

std::vector<LabeledWindow> load_corpus(const std::vector<std::filesystem::path>& dirs,
                                       double window_s, double shift_s) {
  std::vector<LabeledWindow> all;
  for (const auto& dir : dirs) {
    auto rec = load_recording(dir);
    auto windows = segment_windows(rec, window_s, shift_s);
    all.insert(all.end(), std::make_move_iterator(windows.begin()),
               std::make_move_iterator(windows.end()));
  }
  return all;
}

std::map<std::string, double> channel_rates(const Recording& rec) {
  std::map<std::string, double> rates;
  for (const auto& ch : rec.channels) rates[ch.name] = ch.rate_hz;
  return rates;
}

HoldoutSplit split_holdout(const std::vector<LabeledWindow>& windows, HoldoutMode mode,
                           double test_fraction, uint64_t seed) {
  HoldoutSplit split;
  Rng rng(seed ^ kHoldoutStream);
  if (mode == HoldoutMode::kSubject) {
    std::set<std::string> subjects;
    for (const auto& w : windows) subjects.insert(w.subject_id);
    if (subjects.size() < 2) {
      throw ModelError(ModelError::Kind::kInvalidArgument,
                       "subject hold-out needs at least 2 subjects");
    }
    auto it = subjects.begin();
    std::advance(it, static_cast<long>(rng.below(subjects.size())));
    split.test_subjects = {*it};
    for (const auto& w : windows) (w.subject_id == *it ? split.test : split.train).push_back(&w);
    return split;
  }
  std::vector<size_t> idx(windows.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(std::span<size_t>(idx));
  const auto n_test = static_cast<size_t>(std::ceil(test_fraction * static_cast<double>(idx.size())));
  std::vector<char> is_test(windows.size(), 0);
  for (size_t i = 0; i < std::min(n_test, idx.size()); ++i) is_test[idx[i]] = 1;
  for (size_t i = 0; i < windows.size(); ++i) {
    (is_test[i] ? split.test : split.train).push_back(&windows[i]);
  }
  return split;
}

TrainOutcome run_training(const std::vector<LabeledWindow>& windows,
                          const std::map<std::string, double>& rates, const TrainJob& job) {
  if (windows.empty()) throw ModelError(ModelError::Kind::kEmptyInput, "no labeled windows");
  const auto arch = make_arch(rates, job.window_s, job.arch);
  auto split = split_holdout(windows, job.holdout, job.test_fraction, job.hyper.seed);
  TrainOutcome out;
  out.result = train(split.train, arch, job.hyper);
  out.test_subjects = split.test_subjects;
  out.test_windows = split.test.size();
  if (!split.test.empty()) out.heldout = evaluate(out.result.params, split.test, "heldout");
  return out;
}

EvalReport eda_threshold_baseline(const std::vector<const LabeledWindow*>& train,
                                  const std::vector<const LabeledWindow*>& test) {
  auto feature = [](const LabeledWindow& w) {
    auto it = w.per_channel.find("eda");
    if (it == w.per_channel.end()) {
      throw DataError(DataError::Kind::kUnknownChannel, "baseline needs an eda channel");
    }
    return mean_of(it->second);
  };
  if (train.empty() || test.empty()) {
    throw DataError(DataError::Kind::kEmptyInput, "baseline needs train and test windows");
  }
  std::vector<std::pair<double, int>> pts;
  for (const auto* w : train) pts.emplace_back(feature(*w), w->label);
  std::sort(pts.begin(), pts.end());
  size_t total_pos = 0;
  for (const auto& p : pts) total_pos += p.second == 1;

  // Scan thresholds between consecutive sorted values; "above" predicts stressed.
  double best_thr = pts.front().first - 1.0;
  size_t best_correct = total_pos;  // everything above the lowest threshold
  size_t neg_below = 0;
  size_t pos_below = 0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    (pts[i].second == 1 ? pos_below : neg_below)++;
    if (pts[i].first == pts[i + 1].first) continue;
    const size_t correct = neg_below + (total_pos - pos_below);
    if (correct > best_correct) {
      best_correct = correct;
      best_thr = 0.5 * (pts[i].first + pts[i + 1].first);
    }
  }
  std::vector<int> predicted;
  std::vector<int> truth;
  for (const auto* w : test) {
    predicted.push_back(feature(*w) > best_thr ? 1 : 0);
    truth.push_back(w->label);
  }
  return report_from_predictions(predicted, truth, "eda_threshold_baseline");
}

std::vector<PredictionRecord> replay_recording(std::shared_ptr<const StressNetParams> model,
                                               const Recording& rec, double shift_s,
                                               double chunk_s) {
  MonitorConfig cfg;
  cfg.shift_s = shift_s;
  StressMonitor monitor(std::move(model), cfg);
  double end = 0.0;
  for (const auto& ch : rec.channels) end = std::max(end, ch.end_s());
  std::vector<size_t> cursor(rec.channels.size(), 0);
  std::vector<TimedSample> batch;
  for (double t_hi = chunk_s;; t_hi += chunk_s) {
    bool any = false;
    for (size_t c = 0; c < rec.channels.size(); ++c) {
      const auto& ch = rec.channels[c];
      batch.clear();
      while (cursor[c] < ch.samples.size()) {
        const double t = ch.t0_s + static_cast<double>(cursor[c]) / ch.rate_hz;
        if (t >= t_hi) break;
        batch.emplace_back(t, ch.samples[cursor[c]]);
        ++cursor[c];
      }
      if (!batch.empty()) {
        monitor.push_samples(ch.name, batch);
        any = true;
      }
    }
    monitor.tick();
    if (!any && t_hi > end) break;
  }
  monitor.finish();
  return monitor.records();
}

std::vector<PredictionRecord> offline_predictions(const StressNetParams& model,
                                                  const Recording& rec, double shift_s) {
  const double w = model.arch.window_s;
  double origin = rec.channels.front().t0_s;
  double end = rec.channels.front().end_s();
  for (const auto& ch : rec.channels) {
    origin = std::max(origin, ch.t0_s);
    end = std::min(end, ch.end_s());
  }
  std::vector<LabeledWindow> windows;
  for (size_t k = 0;; ++k) {
    const double t = origin + static_cast<double>(k) * shift_s;
    if (t + w > end + 1e-9) break;
    LabeledWindow lw;
    lw.subject_id = rec.subject_id;
    lw.t_start_s = t;
    lw.per_channel = slice_channels(rec.channels, t, w);
    windows.push_back(std::move(lw));
  }
  const auto probs = predict_probabilities(model, windows);
  std::vector<PredictionRecord> out;
  out.reserve(windows.size());
  for (size_t i = 0; i < windows.size(); ++i) {
    out.push_back(PredictionRecord{windows[i].t_start_s, windows[i].t_start_s + w, probs[i],
                                   probs[i] >= model.arch.threshold ? 1 : 0});
  }
  return out;
}

}  // namespace emllm
