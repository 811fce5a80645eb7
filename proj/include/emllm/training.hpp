#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "emllm/signal_store.hpp"
#include "emllm/stress_net.hpp"

namespace emllm {

struct TrainHyper {
  size_t epochs{30};
  size_t batch{32};
  double lr{1e-3};
  uint64_t seed{42};
  size_t patience{5};
  double val_fraction{0.2};
  bool normalize{true};
};

struct EpochLog {
  size_t epoch{0};
  double train_loss{0.0};
  double val_loss{0.0};
};

struct TrainResult {
  StressNetParams params;
  std::vector<EpochLog> log;
  size_t best_epoch{0};  // 0 when no epoch ran
  double best_val_loss{0.0};
  std::vector<std::string> val_subjects;  // empty for a window-level split
  size_t train_windows{0};
  size_t val_windows{0};
};

struct Split {
  std::vector<const LabeledWindow*> train;
  std::vector<const LabeledWindow*> val;
  std::vector<std::string> val_subjects;
};

// Holds out roughly `fraction` of the windows. With at least three subjects
// whole subjects are held out (shuffled by seed) so overlapping windows never
// straddle the split; otherwise windows are drawn at random.
Split split_validation(const std::vector<const LabeledWindow*>& windows, double fraction,
                       uint64_t seed);

// Mini-batch Adam on batch-mean BCE. Returns the parameters of the epoch with
// the lowest validation loss and stops after `patience` epochs without
// improvement. Throws ModelError kSingleClass / kDivergence.
TrainResult train(const std::vector<LabeledWindow>& windows, const ArchConfig& arch,
                  const TrainHyper& hyper);
TrainResult train(const std::vector<const LabeledWindow*>& windows, const ArchConfig& arch,
                  const TrainHyper& hyper);

struct EvalReport {
  double accuracy{0.0};
  double precision{0.0};
  double recall{0.0};
  double f1{0.0};
  size_t tp{0}, fp{0}, fn{0}, tn{0};
  std::string split;

  size_t total() const { return tp + fp + fn + tn; }
};

EvalReport report_from_confusion(size_t tp, size_t fp, size_t fn, size_t tn,
                                 std::string split = {});
EvalReport report_from_predictions(const std::vector<int>& predicted,
                                   const std::vector<int>& truth, std::string split = {});

// Positive class is "stressed"; decision threshold from the model's arch.
EvalReport evaluate(const StressNetParams& params, const std::vector<LabeledWindow>& windows,
                    std::string split = "eval");
EvalReport evaluate(const StressNetParams& params,
                    const std::vector<const LabeledWindow*>& windows, std::string split = "eval");

struct LosoFold {
  std::string subject_id;
  EvalReport report;
  size_t epochs_run{0};
};

struct LosoReport {
  std::vector<LosoFold> folds;
  EvalReport pooled;
};

// Leave-one-subject-out: one fold per subject, trained on all the others.
LosoReport evaluate_loso(const std::vector<LabeledWindow>& windows, const ArchConfig& arch,
                         const TrainHyper& hyper);

}  // namespace emllm
