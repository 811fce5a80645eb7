#include "emllm/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace emllm {

namespace {

std::string display_name(const std::string& name) {
  const auto first = name.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "there";
  const auto last = name.find_last_not_of(" \t\r\n");
  return name.substr(first, last - first + 1);
}

std::string episode_count(size_t n) {
  if (n == 0) return "no stress episodes";
  return std::to_string(n) + (n == 1 ? " stress episode" : " stress episodes");
}

std::string episode_list(const std::vector<Episode>& episodes) {
  std::string out;
  for (size_t i = 0; i < episodes.size(); ++i) {
    if (i > 0) out += i + 1 == episodes.size() ? " and " : ", ";
    out += format_clock(episodes[i].start_s) + "-" + format_clock(episodes[i].end_s);
  }
  return out;
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

std::vector<std::string> default_persona_directives() {
  return {kPsychologistDirective, kCbtDirective, kRefusalDirective};
}

StressSummary public_summary(const StressSummary& s) {
  StressSummary out = s;
  out.head_run = {};
  out.tail_run = {};
  return out;
}

PromptContext make_prompt_context(std::string user_name, const StressSummary& summary,
                                  std::string locale) {
  PromptContext ctx;
  ctx.user_name = std::move(user_name);
  ctx.summary = public_summary(summary);
  ctx.locale = locale.empty() ? "en" : std::move(locale);
  return ctx;
}

std::string format_clock(double seconds) {
  const auto total = static_cast<long long>(std::llround(std::max(0.0, seconds)));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%02lld:%02lld:%02lld", total / 3600, (total / 60) % 60,
                total % 60);
  return buf;
}

std::string format_percent(double fraction) { return format_fixed(100.0 * fraction, 1) + "%"; }

std::string stress_clause(const PromptContext& ctx) {
  const auto& s = ctx.summary;
  std::string out = "Psycho-physiological context: the user's name is " +
                    display_name(ctx.user_name) + ". ";
  if (s.windows_total == 0) {
    return out +
           "Their wearable stress monitor reports that no physiological data was recorded "
           "today, so do not make claims about their stress level.";
  }
  out += "Their wearable stress monitor analysed " + std::to_string(s.windows_total) +
         " windows of physiological data between " + format_clock(s.period_start_s) + " and " +
         format_clock(s.period_end_s) + " of monitoring time; " +
         std::to_string(s.windows_stressed) + " of them (" + format_percent(s.stressed_fraction) +
         ") were classified as stressed. It detected " + episode_count(s.episodes.size());
  if (!s.episodes.empty()) out += " (at " + episode_list(s.episodes) + ")";
  out += ", and the peak stress probability was " + format_fixed(s.peak_probability, 2) +
         ". Use this information with care: bring it up when it is relevant, ask what was "
         "happening at those times, and never present it as a diagnosis.";
  return out;
}

std::string build_system_prompt(const PromptContext& ctx) {
  const auto mandated = default_persona_directives();
  std::string prompt;
  for (const auto& d : mandated) prompt += d + "\n\n";
  prompt += stress_clause(ctx) + "\n\n";
  if (ctx.locale.empty() || ctx.locale == "en" || ctx.locale.rfind("en-", 0) == 0) {
    prompt +=
        "Always reply in English, even if the user writes in another language or an earlier "
        "reply drifted into another language.";
  } else {
    prompt += "Always reply in the language identified by the tag '" + ctx.locale + "'.";
  }
  for (const auto& d : ctx.persona_directives) {
    if (std::find(mandated.begin(), mandated.end(), d) != mandated.end()) continue;
    prompt += "\n\n" + d;
  }
  return prompt;
}

std::string greeting(const PromptContext& ctx) {
  const auto& s = ctx.summary;
  std::string out = "Hi " + display_name(ctx.user_name) +
                    "! I'm EmLLM, a supportive chatbot that follows the principles of Cognitive "
                    "Behavioral Therapy. ";
  if (s.windows_total == 0) {
    out += "I didn't receive any readings from your wearable today, so I can't tell how "
           "stressful your day was.";
  } else if (s.episodes.empty()) {
    out += "Your wearable data shows no stress detected today: there were no sustained stress "
           "episodes, and " +
           format_percent(s.stressed_fraction) + " of the monitored time looked stressed.";
  } else {
    out += "Your wearable data suggests that stress was detected today: I noticed " +
           episode_count(s.episodes.size()) + " (at " + episode_list(s.episodes) + "), and " +
           format_percent(s.stressed_fraction) + " of the monitored time looked stressed.";
  }
  out += " Would you like to discuss your day with me?";
  return out;
}

}  // namespace emllm
