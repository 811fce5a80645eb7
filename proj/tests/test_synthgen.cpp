#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "emllm/json_io.hpp"
#include "emllm/pipeline.hpp"
#include "emllm/synthgen.hpp"
#include "support.hpp"

using namespace emllm;
using testing_support::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioSpec short_spec(double duration = 600, uint64_t seed = 3) {
  ScenarioSpec s;
  s.duration_s = duration;
  s.seed = seed;
  s.intervals = default_protocol(duration);
  return s;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("protocols tile the duration") {
  for (double d : {600.0, 3600.0, 1234.0}) {
    for (const auto& p : {default_protocol(d), calm_protocol(d)}) {
      REQUIRE(!p.empty());
      CHECK(p.front().t_start_s == 0.0);
      CHECK(p.back().t_end_s == d);
      for (size_t i = 1; i < p.size(); ++i) CHECK(p[i].t_start_s == p[i - 1].t_end_s);
    }
  }
  const auto p = default_protocol(3600);
  REQUIRE(p.size() == 5);
  CHECK(p[1].condition == 2);
  CHECK(p[1].t_start_s == 900);
  CHECK(p[1].t_end_s == 1620);
  CHECK(p[3].condition == 2);
  for (const auto& l : calm_protocol(3600)) CHECK(l.condition != 2);
}

TEST_CASE("scenario validation") {
  auto s = short_spec();
  CHECK_NOTHROW(validate_scenario(s));
  s.intervals = {{0, 300, 1}, {350, 600, 2}};
  CHECK_THROWS_AS(validate_scenario(s), DataError);
  s.intervals = {{0, 300, 1}, {300, 500, 2}};
  CHECK_THROWS_AS(validate_scenario(s), DataError);
  s.intervals = {{0, 300, 1}, {200, 600, 2}};
  CHECK_THROWS_AS(validate_scenario(s), DataError);
  s = short_spec();
  s.duration_s = -1;
  CHECK_THROWS_AS(validate_scenario(s), DataError);
}

TEST_CASE("synthesized recordings have the declared shape") {
  const auto rec = synthesize(short_spec());
  REQUIRE(rec.channels.size() == 3);
  CHECK(rec.channels[0].name == "bvp");
  CHECK(rec.channels[0].samples.size() == 600 * 64);
  CHECK(rec.channels[1].name == "eda");
  CHECK(rec.channels[1].samples.size() == 600 * 4);
  CHECK(rec.channels[2].samples.size() == 600 * 4);
  CHECK(rec.labels.size() == 5);
}

TEST_CASE("same spec gives identical bytes; different seeds differ") {
  TempDir dir;
  generate(short_spec(), dir / "a");
  generate(short_spec(), dir / "b");
  generate(short_spec(600, 4), dir / "c");
  for (const char* f : {"meta.json", "bvp.csv", "eda.csv", "temp.csv", "labels.csv"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(slurp(dir / "a" / "eda.csv") != slurp(dir / "c" / "eda.csv"));
}

TEST_CASE("written recordings load back to the synthesized values") {
  TempDir dir;
  const auto spec = short_spec();
  generate(spec, dir / "S01");
  const auto loaded = load_recording(dir / "S01");
  const auto made = synthesize(spec);
  REQUIRE(loaded.channels.size() == made.channels.size());
  for (size_t c = 0; c < made.channels.size(); ++c) {
    CHECK(loaded.channels[c].samples == made.channels[c].samples);
    CHECK(loaded.channels[c].rate_hz == made.channels[c].rate_hz);
  }
  REQUIRE(loaded.labels.size() == made.labels.size());
  CHECK(loaded.labels[2].t_end_s == made.labels[2].t_end_s);
}

TEST_CASE("stress shifts mean EDA by the configured effect size") {
  const auto rec = synthesize(short_spec(3600, 8));
  const auto ws = segment_windows(rec, 60, 30);
  std::vector<double> calm, stressed;
  for (const auto& w : ws) (w.label ? stressed : calm).push_back(mean(w.per_channel.at("eda")));
  REQUIRE(!calm.empty());
  REQUIRE(!stressed.empty());
  CHECK(mean(stressed) - mean(calm) >= 1.0);

  std::vector<const LabeledWindow*> all;
  for (const auto& w : ws) all.push_back(&w);
  const auto base = eda_threshold_baseline(all, all);
  CHECK(base.accuracy >= 0.95);
}

TEST_CASE("generate_all writes one directory per subject") {
  TempDir dir;
  std::vector<ScenarioSpec> specs;
  for (int i = 0; i < 3; ++i) {
    auto s = short_spec(300, 10 + i);
    s.subject_id = "S0" + std::to_string(i + 1);
    specs.push_back(s);
  }
  generate_all(specs, dir.path());
  for (const auto& s : specs) CHECK(load_recording(dir / s.subject_id).subject_id == s.subject_id);
}

TEST_CASE("scenario JSON") {
  const auto j = nlohmann::json::parse(
      R"({"subject_id":"X1","duration_s":300,"seed":5,"intervals":[[0,100,1],[100,300,2]]})");
  const auto s = j.get<ScenarioSpec>();
  CHECK(s.subject_id == "X1");
  CHECK(s.seed == 5);
  REQUIRE(s.intervals.size() == 2);
  CHECK(s.intervals[1].condition == 2);
  const auto d = nlohmann::json::parse(R"({"subject_id":"X2","duration_s":600})").get<ScenarioSpec>();
  CHECK(d.intervals.size() == default_protocol(600).size());
}

TEST_CASE("format_number round-trips") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-1e6, 1e6) * std::pow(10.0, static_cast<double>(rng.below(20)) - 10);
    CHECK(std::stod(format_number(v)) == v);
  }
  CHECK(format_number(0.25) == "0.25");
  CHECK(format_number(3.0) == "3");
}
