#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emllm/monitor.hpp"
#include "emllm/signal_store.hpp"
#include "emllm/stress_net.hpp"
#include "emllm/training.hpp"

namespace emllm {

// Loads every recording and segments it; windows keep their subject ids.
std::vector<LabeledWindow> load_corpus(const std::vector<std::filesystem::path>& dirs,
                                       double window_s, double shift_s);

std::map<std::string, double> channel_rates(const Recording& rec);

enum class HoldoutMode { kRandom, kSubject };

struct HoldoutSplit {
  std::vector<const LabeledWindow*> train;
  std::vector<const LabeledWindow*> test;
  std::vector<std::string> test_subjects;
};

// kRandom pools every subject's windows and holds out test_fraction of them;
// kSubject holds out one seeded-random subject.
HoldoutSplit split_holdout(const std::vector<LabeledWindow>& windows, HoldoutMode mode,
                           double test_fraction, uint64_t seed);

struct TrainJob {
  double window_s{60.0};
  double shift_s{5.0};
  TrainHyper hyper;
  ArchOptions arch;
  HoldoutMode holdout{HoldoutMode::kRandom};
  double test_fraction{0.2};
};

struct TrainOutcome {
  TrainResult result;
  EvalReport heldout;
  std::vector<std::string> test_subjects;
  size_t test_windows{0};
};

TrainOutcome run_training(const std::vector<LabeledWindow>& windows,
                          const std::map<std::string, double>& rates, const TrainJob& job);

// Mean-EDA threshold classifier fitted on train (best training accuracy),
// scored on test. The floor any trained network must meet on synthetic data.
EvalReport eda_threshold_baseline(const std::vector<const LabeledWindow*>& train,
                                  const std::vector<const LabeledWindow*>& test);

// Streams a recording through a StressMonitor in chunk_s-second batches,
// channels interleaved, ticking after each round, then finishes the stream.
std::vector<PredictionRecord> replay_recording(std::shared_ptr<const StressNetParams> model,
                                               const Recording& rec, double shift_s,
                                               double chunk_s = 1.0);

// Predictions for every grid window over the whole recording, computed by
// slicing the full arrays directly (no buffering, no labels).
std::vector<PredictionRecord> offline_predictions(const StressNetParams& model,
                                                  const Recording& rec, double shift_s);

}  // namespace emllm
