#pragma once

#include <json.hpp>

#include "emllm/monitor.hpp"
#include "emllm/synthgen.hpp"
#include "emllm/training.hpp"

namespace emllm {

void to_json(nlohmann::json& j, const EvalReport& r);
void to_json(nlohmann::json& j, const EpochLog& e);
void to_json(nlohmann::json& j, const LosoReport& r);
void to_json(nlohmann::json& j, const PredictionRecord& r);
void to_json(nlohmann::json& j, const Episode& e);

// Public summary fields only; the edge-run bookkeeping is not serialized.
void to_json(nlohmann::json& j, const StressSummary& s);
void from_json(const nlohmann::json& j, StressSummary& s);

// {"subject_id", "duration_s", "seed", "intervals": [[start, end, condition], ...],
//  optional effect sizes}
void from_json(const nlohmann::json& j, ScenarioSpec& s);

}  // namespace emllm
