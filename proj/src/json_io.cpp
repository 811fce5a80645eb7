#include "emllm/json_io.hpp"

namespace emllm {

using json = nlohmann::json;

void to_json(json& j, const EvalReport& r) {
  j = json{{"split", r.split},         {"accuracy", r.accuracy}, {"precision", r.precision},
           {"recall", r.recall},       {"f1", r.f1},             {"tp", r.tp},
           {"fp", r.fp},               {"fn", r.fn},             {"tn", r.tn},
           {"total", r.total()}};
}

void to_json(json& j, const EpochLog& e) {
  j = json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}};
}

void to_json(json& j, const LosoReport& r) {
  json folds = json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"subject_id", f.subject_id}, {"epochs_run", f.epochs_run}, {"report", f.report}});
  }
  j = json{{"folds", folds}, {"pooled", r.pooled}};
}

void to_json(json& j, const PredictionRecord& r) {
  j = json{{"t_start_s", r.t_start_s},
           {"t_end_s", r.t_end_s},
           {"probability", r.probability},
           {"label", r.label}};
}

void to_json(json& j, const Episode& e) {
  j = json{{"start_s", e.start_s}, {"end_s", e.end_s}, {"windows", e.windows}};
}

void to_json(json& j, const StressSummary& s) {
  j = json{{"period", {{"start_s", s.period_start_s}, {"end_s", s.period_end_s}}},
           {"windows_total", s.windows_total},
           {"windows_stressed", s.windows_stressed},
           {"stressed_fraction", s.stressed_fraction},
           {"episodes", s.episodes},
           {"peak_probability", s.peak_probability}};
}

void from_json(const json& j, StressSummary& s) {
  s = StressSummary{};
  s.period_start_s = j.at("period").at("start_s").get<double>();
  s.period_end_s = j.at("period").at("end_s").get<double>();
  s.windows_total = j.at("windows_total").get<size_t>();
  s.windows_stressed = j.at("windows_stressed").get<size_t>();
  s.stressed_fraction = j.at("stressed_fraction").get<double>();
  s.peak_probability = j.at("peak_probability").get<double>();
  for (const auto& e : j.at("episodes")) {
    s.episodes.push_back(Episode{e.at("start_s").get<double>(), e.at("end_s").get<double>(),
                                 e.at("windows").get<size_t>()});
  }
}

void from_json(const json& j, ScenarioSpec& s) {
  s = ScenarioSpec{};
  s.subject_id = j.at("subject_id").get<std::string>();
  s.duration_s = j.at("duration_s").get<double>();
  s.seed = j.value("seed", s.seed);
  s.eda_shift = j.value("eda_shift", s.eda_shift);
  s.bvp_freq_shift = j.value("bvp_freq_shift", s.bvp_freq_shift);
  s.temp_shift = j.value("temp_shift", s.temp_shift);
  if (j.contains("intervals")) {
    for (const auto& iv : j.at("intervals")) {
      if (!iv.is_array() || iv.size() != 3) {
        throw DataError(DataError::Kind::kInvalidArgument,
                        "scenario: each interval is [start_s, end_s, condition]");
      }
      s.intervals.push_back({iv[0].get<double>(), iv[1].get<double>(), iv[2].get<int>()});
    }
  } else {
    s.intervals = default_protocol(s.duration_s);
  }
}

}  // namespace emllm
