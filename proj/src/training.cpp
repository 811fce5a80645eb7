#include "emllm/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "emllm/adam.hpp"
#include "emllm/rng.hpp"

namespace emllm {

namespace {

// Distinct PRNG streams derived from the user seed.
constexpr uint64_t kSplitStream = 0x5b1e7c0de5eedULL;
constexpr uint64_t kShuffleStream = 0x5eed5f1e5b0bULL;

void require_both_classes(const std::vector<const LabeledWindow*>& windows, const char* what) {
  bool pos = false;
  bool neg = false;
  for (const auto* w : windows) (w->label == 1 ? pos : neg) = true;
  if (!pos || !neg) {
    throw ModelError(ModelError::Kind::kSingleClass,
                     std::string(what) + " contains only one class; need stressed and "
                                         "non-stressed windows");
  }
}

}  // namespace

Split split_validation(const std::vector<const LabeledWindow*>& windows, double fraction,
                       uint64_t seed) {
  Split split;
  if (windows.empty() || fraction <= 0.0) {
    split.train = windows;
    return split;
  }
  Rng rng(seed ^ kSplitStream);
  std::set<std::string> subject_set;
  for (const auto* w : windows) subject_set.insert(w->subject_id);
  const auto target = static_cast<size_t>(std::ceil(fraction * static_cast<double>(windows.size())));

  if (subject_set.size() >= 3) {
    std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
    rng.shuffle(std::span<std::string>(subjects));
    std::map<std::string, size_t> counts;
    for (const auto* w : windows) ++counts[w->subject_id];
    std::set<std::string> held;
    size_t held_count = 0;
    for (size_t i = 0; i + 1 < subjects.size() && held_count < target; ++i) {
      held.insert(subjects[i]);
      held_count += counts[subjects[i]];
    }
    for (const auto* w : windows) (held.count(w->subject_id) ? split.val : split.train).push_back(w);
    split.val_subjects.assign(held.begin(), held.end());
    return split;
  }

  std::vector<size_t> idx(windows.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(std::span<size_t>(idx));
  const size_t n_val = std::min(target, windows.size() - 1);
  std::vector<char> is_val(windows.size(), 0);
  for (size_t i = 0; i < n_val; ++i) is_val[idx[i]] = 1;
  for (size_t i = 0; i < windows.size(); ++i) {
    (is_val[i] ? split.val : split.train).push_back(windows[i]);
  }
  return split;
}

TrainResult train(const std::vector<const LabeledWindow*>& windows, const ArchConfig& arch,
                  const TrainHyper& hyper) {
  if (windows.empty()) throw ModelError(ModelError::Kind::kEmptyInput, "no training windows");
  if (hyper.batch < 1) throw ModelError(ModelError::Kind::kInvalidArgument, "batch must be >= 1");
  require_both_classes(windows, "training data");

  Split split = split_validation(windows, hyper.val_fraction, hyper.seed);
  require_both_classes(split.train, "training split");

  TrainResult result;
  result.params = build_network(arch, hyper.seed);
  result.params.normalize = hyper.normalize;
  if (hyper.normalize) result.params.norm_stats = fit_norm_stats(split.train);
  result.val_subjects = split.val_subjects;
  result.train_windows = split.train.size();
  result.val_windows = split.val.size();
  if (hyper.epochs == 0) return result;

  auto& params = result.params;
  nn::AdamState adam(nn::AdamConfig{hyper.lr, 0.9, 0.999, 1e-8}, params.layout.n_params);
  std::vector<double> grads(params.layout.n_params);
  Rng rng(hyper.seed ^ kShuffleStream);
  std::vector<const LabeledWindow*> order = split.train;

  StressNetParams best = params;
  double best_loss = std::numeric_limits<double>::infinity();
  size_t since_best = 0;

  for (size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(std::span<const LabeledWindow*>(order));
    double loss_sum = 0.0;
    for (size_t lo = 0; lo < order.size(); lo += hyper.batch) {
      const size_t hi = std::min(order.size(), lo + hyper.batch);
      std::span<const LabeledWindow* const> batch(order.data() + lo, hi - lo);
      double loss = 0.0;
      try {
        loss = batch_gradient(params, batch, true, grads);
      } catch (const NonFiniteError& e) {
        throw ModelError(ModelError::Kind::kDivergence,
                         "epoch " + std::to_string(epoch) + ": " + e.what());
      }
      if (!std::isfinite(loss)) {
        throw ModelError(ModelError::Kind::kDivergence,
                         "non-finite training loss at epoch " + std::to_string(epoch));
      }
      nn::adam_step(params.values, grads, adam);
      loss_sum += loss * static_cast<double>(hi - lo);
    }
    for (double v : params.values) {
      if (!std::isfinite(v)) {
        throw ModelError(ModelError::Kind::kDivergence,
                         "non-finite parameter after epoch " + std::to_string(epoch));
      }
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    try {
      entry.val_loss = split.val.empty() ? entry.train_loss : batch_loss(params, split.val, true);
    } catch (const NonFiniteError& e) {
      throw ModelError(ModelError::Kind::kDivergence,
                       "validation at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    result.log.push_back(entry);

    if (entry.val_loss < best_loss) {
      best_loss = entry.val_loss;
      best = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= hyper.patience && hyper.patience > 0) {
      break;
    }
  }
  result.best_val_loss = best_loss;
  result.params = std::move(best);
  return result;
}

TrainResult train(const std::vector<LabeledWindow>& windows, const ArchConfig& arch,
                  const TrainHyper& hyper) {
  std::vector<const LabeledWindow*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  return train(ptrs, arch, hyper);
}

EvalReport report_from_confusion(size_t tp, size_t fp, size_t fn, size_t tn, std::string split) {
  EvalReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.tn = tn;
  r.split = std::move(split);
  const double total = static_cast<double>(tp + fp + fn + tn);
  r.accuracy = total > 0 ? static_cast<double>(tp + tn) / total : 0.0;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double pr = r.precision + r.recall;
  r.f1 = pr > 0 ? 2.0 * r.precision * r.recall / pr : 0.0;
  return r;
}

EvalReport report_from_predictions(const std::vector<int>& predicted,
                                   const std::vector<int>& truth, std::string split) {
  if (predicted.size() != truth.size()) {
    throw ModelError(ModelError::Kind::kShapeMismatch, "prediction/label count mismatch");
  }
  size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == 1) {
      (truth[i] == 1 ? tp : fp)++;
    } else {
      (truth[i] == 1 ? fn : tn)++;
    }
  }
  return report_from_confusion(tp, fp, fn, tn, std::move(split));
}

EvalReport evaluate(const StressNetParams& params,
                    const std::vector<const LabeledWindow*>& windows, std::string split) {
  if (windows.empty()) throw ModelError(ModelError::Kind::kEmptyInput, "no windows to evaluate");
  const auto probs = predict_probabilities(params, windows);
  std::vector<int> predicted(windows.size());
  std::vector<int> truth(windows.size());
  for (size_t i = 0; i < windows.size(); ++i) {
    predicted[i] = probs[i] >= params.arch.threshold ? 1 : 0;
    truth[i] = windows[i]->label;
  }
  return report_from_predictions(predicted, truth, std::move(split));
}

EvalReport evaluate(const StressNetParams& params, const std::vector<LabeledWindow>& windows,
                    std::string split) {
  std::vector<const LabeledWindow*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  return evaluate(params, ptrs, std::move(split));
}

LosoReport evaluate_loso(const std::vector<LabeledWindow>& windows, const ArchConfig& arch,
                         const TrainHyper& hyper) {
  std::map<std::string, std::vector<const LabeledWindow*>> by_subject;
  for (const auto& w : windows) by_subject[w.subject_id].push_back(&w);
  if (by_subject.size() < 2) {
    throw ModelError(ModelError::Kind::kInvalidArgument, "LOSO needs at least 2 subjects");
  }
  LosoReport out;
  size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& [subject, test] : by_subject) {
    if (test.empty()) {
      throw ModelError(ModelError::Kind::kEmptyInput, "subject " + subject + " has no windows");
    }
    std::vector<const LabeledWindow*> rest;
    for (const auto& [other, ws] : by_subject) {
      if (other != subject) rest.insert(rest.end(), ws.begin(), ws.end());
    }
    auto trained = train(rest, arch, hyper);
    LosoFold fold;
    fold.subject_id = subject;
    fold.report = evaluate(trained.params, test, "loso:" + subject);
    fold.epochs_run = trained.log.size();
    tp += fold.report.tp;
    fp += fold.report.fp;
    fn += fold.report.fn;
    tn += fold.report.tn;
    out.folds.push_back(std::move(fold));
  }
  out.pooled = report_from_confusion(tp, fp, fn, tn, "loso:pooled");
  return out;
}

}  // namespace emllm
