#pragma once

#include <string>
#include <vector>

#include "emllm/monitor.hpp"

namespace emllm {

// Directive clauses every system prompt carries, in this order, ahead of the
// stress context.
inline constexpr const char* kPsychologistDirective =
    "You are EmLLM, a supportive conversational companion. Act like a trained psychologist: "
    "listen carefully, reflect the user's feelings back to them, and respond with warmth "
    "and professional care.";
inline constexpr const char* kCbtDirective =
    "Follow the principles of Cognitive Behavioral Therapy (CBT): help the user notice the "
    "links between situations, thoughts, feelings and behaviours, gently examine unhelpful "
    "thoughts, and suggest small, practical next steps.";
inline constexpr const char* kRefusalDirective =
    "Whenever you cannot answer a question, say so plainly and provide a reasonable "
    "explanation of why you cannot answer it instead of guessing.";

std::vector<std::string> default_persona_directives();

struct PromptContext {
  std::string user_name;
  StressSummary summary;
  std::vector<std::string> persona_directives = default_persona_directives();
  std::string locale{"en"};

  bool operator==(const PromptContext&) const = default;
};

// Summary as the chat layer sees it: public fields only.
StressSummary public_summary(const StressSummary& s);

PromptContext make_prompt_context(std::string user_name, const StressSummary& summary,
                                  std::string locale = "en");

// Elapsed monitoring time as HH:MM:SS.
std::string format_clock(double seconds);
// "30.0%"
std::string format_percent(double fraction);

// Psychologist persona, CBT, refusal explanation, stress context, response
// language, then any caller-supplied directives. Byte-deterministic.
std::string build_system_prompt(const PromptContext& ctx);
std::string stress_clause(const PromptContext& ctx);

// Opening assistant message, templated locally so it never depends on the LLM.
std::string greeting(const PromptContext& ctx);

}  // namespace emllm
