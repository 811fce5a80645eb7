#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "emllm/training.hpp"
#include "support.hpp"

using namespace emllm;

namespace {

ArchConfig tiny_arch() {
  ArchOptions opt;
  opt.filters = {2, 2, 2};
  opt.hidden = 4;
  opt.pool_size = 2;
  opt.pool_stride = 2;
  return make_arch({{"eda", 4.0}, {"temp", 2.0}}, 24.0, opt);
}

// Stressed windows sit 1.5 units higher on eda; both classes carry noise.
std::vector<LabeledWindow> separable(size_t per_subject, size_t subjects, uint64_t seed) {
  Rng rng(seed);
  const auto arch = tiny_arch();
  std::vector<LabeledWindow> out;
  for (size_t s = 0; s < subjects; ++s) {
    for (size_t i = 0; i < per_subject; ++i) {
      const int label = static_cast<int>(i % 2);
      auto w = testing_support::random_window(rng, arch, label);
      w.subject_id = "S" + std::to_string(s);
      w.t_start_s = static_cast<double>(i);
      for (auto& v : w.per_channel["eda"]) v = 2.0 + 1.5 * label + 0.2 * v;
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<const LabeledWindow*> ptrs(const std::vector<LabeledWindow>& ws) {
  std::vector<const LabeledWindow*> p;
  for (const auto& w : ws) p.push_back(&w);
  return p;
}

}  // namespace

TEST_CASE("metrics from a confusion matrix") {
  const auto r = report_from_confusion(8, 2, 4, 6);
  CHECK(r.accuracy == doctest::Approx(14.0 / 20));
  CHECK(r.precision == doctest::Approx(0.8));
  CHECK(r.recall == doctest::Approx(8.0 / 12));
  CHECK(r.f1 == doctest::Approx(2 * 0.8 * (8.0 / 12) / (0.8 + 8.0 / 12)));
  CHECK(r.total() == 20);
  const auto none = report_from_confusion(0, 0, 3, 7);
  CHECK(none.precision == 0.0);
  CHECK(none.f1 == 0.0);
  const auto p = report_from_predictions({1, 0, 1, 1}, {1, 0, 0, 1});
  CHECK(p.tp == 2);
  CHECK(p.fp == 1);
  CHECK(p.tn == 1);
  CHECK(p.fn == 0);
}

TEST_CASE("validation split holds out whole subjects when there are enough") {
  const auto ws = separable(10, 5, 1);
  const auto split = split_validation(ptrs(ws), 0.2, 42);
  REQUIRE(!split.val_subjects.empty());
  std::set<std::string> train_subjects, val_subjects;
  for (const auto* w : split.train) train_subjects.insert(w->subject_id);
  for (const auto* w : split.val) val_subjects.insert(w->subject_id);
  for (const auto& s : val_subjects) CHECK(train_subjects.count(s) == 0);
  CHECK(split.train.size() + split.val.size() == ws.size());

  const auto two = separable(20, 2, 1);
  const auto s2 = split_validation(ptrs(two), 0.2, 42);
  CHECK(s2.val_subjects.empty());
  CHECK(s2.val.size() == 8);
  const auto again = split_validation(ptrs(two), 0.2, 42);
  CHECK(again.val == s2.val);
}

TEST_CASE("training separates a separable problem and is reproducible") {
  const auto ws = separable(40, 3, 7);
  TrainHyper h;
  h.epochs = 15;
  h.batch = 8;
  h.lr = 1e-2;
  h.seed = 5;
  const auto a = train(ws, tiny_arch(), h);
  const auto b = train(ws, tiny_arch(), h);
  CHECK(a.params == b.params);
  CHECK(a.best_epoch >= 1);
  CHECK(a.train_windows + a.val_windows == ws.size());
  const auto test = separable(20, 1, 99);
  const auto report = evaluate(a.params, test, "test");
  CHECK(report.accuracy >= 0.95);
  CHECK(report.split == "test");

  // The returned parameters are the best-validation epoch's.
  double best = 1e300;
  for (const auto& e : a.log) best = std::min(best, e.val_loss);
  CHECK(a.best_val_loss == best);
}

TEST_CASE("early stopping stops after patience epochs without improvement") {
  const auto ws = separable(30, 3, 3);
  TrainHyper h;
  h.epochs = 200;
  h.batch = 8;
  h.lr = 5e-2;
  h.patience = 2;
  const auto r = train(ws, tiny_arch(), h);
  CHECK(r.log.size() < 200);
  CHECK(r.log.size() - r.best_epoch <= 2);
}

TEST_CASE("zero epochs returns the initialized network") {
  const auto ws = separable(10, 1, 3);
  TrainHyper h;
  h.epochs = 0;
  const auto r = train(ws, tiny_arch(), h);
  auto init = build_network(tiny_arch(), h.seed);
  CHECK(r.params.values == init.values);
  CHECK(r.log.empty());
  CHECK(r.best_epoch == 0);
  CHECK(r.params.norm_stats.channels.count("eda") == 1);
}

TEST_CASE("training errors") {
  auto ws = separable(10, 1, 3);
  for (auto& w : ws) w.label = 0;
  TrainHyper h;
  try {
    train(ws, tiny_arch(), h);
    FAIL("expected SingleClass");
  } catch (const ModelError& e) {
    CHECK(e.kind() == ModelError::Kind::kSingleClass);
  }
  CHECK_THROWS_AS(train(std::vector<LabeledWindow>{}, tiny_arch(), h), ModelError);

  // Adam moves every parameter by about lr per step, so this overflows at once.
  const auto bad = separable(10, 1, 3);
  h.lr = 1e300;
  bool diverged = false;
  try {
    train(bad, tiny_arch(), h);
  } catch (const ModelError& e) {
    diverged = e.kind() == ModelError::Kind::kDivergence;
  }
  CHECK(diverged);
}

TEST_CASE("leave-one-subject-out produces one fold per subject") {
  const auto ws = separable(20, 2, 11);
  TrainHyper h;
  h.epochs = 5;
  h.batch = 8;
  h.lr = 1e-2;
  const auto r = evaluate_loso(ws, tiny_arch(), h);
  REQUIRE(r.folds.size() == 2);
  CHECK(r.folds[0].subject_id == "S0");
  CHECK(r.folds[1].subject_id == "S1");
  CHECK(r.pooled.total() == ws.size());
  CHECK(r.folds[0].report.total() + r.folds[1].report.total() == ws.size());
  CHECK_THROWS_AS(evaluate_loso(separable(10, 1, 1), tiny_arch(), h), ModelError);
}
