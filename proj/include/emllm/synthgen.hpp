#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emllm/signal_store.hpp"

namespace emllm {

// Scripted multi-rate recording. The signal models are deliberately simple
// (sinusoid + drift + Gaussian noise); they exist to exercise the pipeline,
// not to imitate physiology.
struct ScenarioSpec {
  std::string subject_id{"S01"};
  double duration_s{3600.0};
  std::vector<ConditionLabel> intervals;  // must tile [0, duration_s)
  uint64_t seed{1};

  double eda_shift{1.5};       // microsiemens added to tonic EDA under stress
  double bvp_freq_shift{0.3};  // Hz added to the 1.2 Hz pulse under stress
  double temp_shift{-0.3};     // degrees C added under stress

  double bvp_rate_hz{64.0};
  double eda_rate_hz{4.0};
  double temp_rate_hz{4.0};

  double eda_noise{0.05};
  double eda_drift{0.15};  // amplitude of the slow tonic drift
  double bvp_noise{5.0};
  double temp_noise{0.01};
};

// Baseline, stress, amusement, stress, baseline at 25/20/15/20/20 % of the
// duration (boundaries rounded to whole seconds).
std::vector<ConditionLabel> default_protocol(double duration_s);
// Baseline and amusement only.
std::vector<ConditionLabel> calm_protocol(double duration_s);

// Throws DataError kInvalidArgument when the intervals do not tile the duration.
void validate_scenario(const ScenarioSpec& spec);

Recording synthesize(const ScenarioSpec& spec);

// Writes meta.json, bvp.csv, eda.csv, temp.csv and labels.csv into dir.
void write_recording(const Recording& rec, const std::filesystem::path& dir);

// synthesize + write_recording. Output is byte-identical for identical specs.
void generate(const ScenarioSpec& spec, const std::filesystem::path& dir);
void generate_all(const std::vector<ScenarioSpec>& specs, const std::filesystem::path& root);

// Shortest decimal form that parses back to the same double.
std::string format_number(double v);

}  // namespace emllm
