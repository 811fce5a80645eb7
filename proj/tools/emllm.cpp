#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emllm/chat_service.hpp"
#include "emllm/http_api.hpp"
#include "emllm/json_io.hpp"
#include "emllm/llm_client.hpp"
#include "emllm/pipeline.hpp"
#include "emllm/synthgen.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

void log(const std::string& msg) { std::cerr << "emllm: " << msg << '\n'; }

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

// Config files are TOML, or JSON objects whose nested objects name subcommands:
//   {"train": {"epochs": 5, "data": ["a", "b"]}}
class JsonOrTomlConfig : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::stringstream ss;
    ss << input.rdbuf();
    const std::string text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || text[first] != '{') {
      std::istringstream in(text);
      return CLI::ConfigTOML::from_config(in);
    }
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file: ") + e.what());
    }
    std::string toml;
    std::string sections;
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        sections += "[" + key + "]\n";
        for (const auto& [k, v] : value.items()) sections += k + " = " + toml_value(v) + "\n";
      } else {
        toml += key + " = " + toml_value(value) + "\n";
      }
    }
    std::istringstream in(toml + sections);
    return CLI::ConfigTOML::from_config(in);
  }

 private:
  static std::string toml_value(const json& v) {
    if (v.is_object()) throw CLI::ConversionError("config file: nesting deeper than one level");
    if (!v.is_array()) return v.dump();
    std::string out = "[";
    for (size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + toml_value(v[i]);
    return out + "]";
  }
};

std::vector<fs::path> to_paths(const std::vector<std::string>& v) {
  return {v.begin(), v.end()};
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string spec_file;
  size_t subjects{4};
  double duration_s{3600.0};
  uint64_t seed{42};
  bool calm{false};
  std::string out;
};

std::vector<emllm::ScenarioSpec> scenarios_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw emllm::DataError(emllm::DataError::Kind::kMissingFile, "cannot read " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw emllm::DataError(emllm::DataError::Kind::kInvalidArgument,
                           path + ": " + e.what());
  }
  const json list = j.is_array() ? j : (j.contains("subjects") ? j.at("subjects") : json::array({j}));
  std::vector<emllm::ScenarioSpec> specs;
  try {
    for (const auto& item : list) specs.push_back(item.get<emllm::ScenarioSpec>());
  } catch (const json::exception& e) {
    throw emllm::DataError(emllm::DataError::Kind::kInvalidArgument, path + ": " + e.what());
  }
  return specs;
}

int cmd_synth(const SynthArgs& a) {
  std::vector<emllm::ScenarioSpec> specs;
  if (!a.spec_file.empty()) {
    specs = scenarios_from_file(a.spec_file);
  } else {
    for (size_t i = 0; i < a.subjects; ++i) {
      emllm::ScenarioSpec s;
      char id[16];
      std::snprintf(id, sizeof id, "S%02zu", i + 1);
      s.subject_id = id;
      s.duration_s = a.duration_s;
      s.seed = a.seed * 1000003ULL + i;
      s.intervals = a.calm ? emllm::calm_protocol(a.duration_s)
                           : emllm::default_protocol(a.duration_s);
      specs.push_back(std::move(s));
    }
  }
  for (const auto& s : specs) emllm::validate_scenario(s);
  emllm::generate_all(specs, a.out);
  json dirs = json::array();
  for (const auto& s : specs) dirs.push_back((fs::path(a.out) / s.subject_id).string());
  log("wrote " + std::to_string(specs.size()) + " recordings under " + a.out);
  emit({{"recordings", dirs}});
  return kOk;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::vector<std::string> data;
  double window_s{60.0};
  double shift_s{5.0};
  size_t epochs{30};
  size_t batch{32};
  double lr{1e-3};
  uint64_t seed{42};
  size_t patience{5};
  std::string holdout{"random"};
  double test_fraction{0.2};
  bool no_normalize{false};
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  const auto dirs = to_paths(a.data);
  const auto rates = emllm::channel_rates(emllm::load_recording(dirs.front()));
  const auto windows = emllm::load_corpus(dirs, a.window_s, a.shift_s);
  log("loaded " + std::to_string(windows.size()) + " windows from " +
      std::to_string(dirs.size()) + " recordings");

  emllm::TrainJob job;
  job.window_s = a.window_s;
  job.shift_s = a.shift_s;
  job.hyper.epochs = a.epochs;
  job.hyper.batch = a.batch;
  job.hyper.lr = a.lr;
  job.hyper.seed = a.seed;
  job.hyper.patience = a.patience;
  job.hyper.normalize = !a.no_normalize;
  job.holdout = a.holdout == "subject" ? emllm::HoldoutMode::kSubject
                                       : emllm::HoldoutMode::kRandom;
  job.test_fraction = a.test_fraction;

  const auto outcome = emllm::run_training(windows, rates, job);
  for (const auto& e : outcome.result.log) {
    log("epoch " + std::to_string(e.epoch) + " train_loss " + emllm::format_number(e.train_loss) +
        " val_loss " + emllm::format_number(e.val_loss));
  }
  emllm::save_model(outcome.result.params, a.out);
  log("saved model to " + a.out);

  json report{{"model", a.out},
              {"heldout", outcome.heldout},
              {"test_windows", outcome.test_windows},
              {"test_subjects", outcome.test_subjects},
              {"train_windows", outcome.result.train_windows},
              {"val_windows", outcome.result.val_windows},
              {"val_subjects", outcome.result.val_subjects},
              {"best_epoch", outcome.result.best_epoch},
              {"best_val_loss", outcome.result.best_val_loss},
              {"epochs", outcome.result.log}};
  emit(report);
  return kOk;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::vector<std::string> data;
  double shift_s{5.0};
  bool loso{false};
  size_t epochs{30};
  uint64_t seed{42};
};

int cmd_eval(const EvalArgs& a) {
  const auto params = emllm::load_model(a.model);
  const auto windows = emllm::load_corpus(to_paths(a.data), params.arch.window_s, a.shift_s);
  log("loaded " + std::to_string(windows.size()) + " windows");
  if (!a.loso) {
    emit(json(emllm::evaluate(params, windows)));
    return kOk;
  }
  emllm::TrainHyper hyper;
  hyper.epochs = a.epochs;
  hyper.seed = a.seed;
  hyper.normalize = params.normalize;
  emit(json(emllm::evaluate_loso(windows, params.arch, hyper)));
  return kOk;
}

// ---- replay --------------------------------------------------------------

struct ReplayArgs {
  std::string model;
  std::string data;
  double shift_s{5.0};
  bool records{false};
};

int cmd_replay(const ReplayArgs& a) {
  auto model = std::make_shared<const emllm::StressNetParams>(emllm::load_model(a.model));
  const auto rec = emllm::load_recording(a.data);
  const auto records = emllm::replay_recording(model, rec, a.shift_s);
  const auto summary = emllm::summarize(records);
  log("replayed " + std::to_string(records.size()) + " windows");
  if (!a.records) {
    emit(json(summary));
  } else {
    emit({{"summary", summary}, {"records", records}});
  }
  return kOk;
}

// ---- serve ---------------------------------------------------------------

struct ServeArgs {
  std::string model;
  std::string bind{"127.0.0.1:8080"};
  std::string data_dir{"emllm-data"};
  std::string static_dir;
  std::string llm_url;
  std::string llm_model;
  double llm_timeout_s{60.0};
  int llm_retries{2};
  double shift_s{5.0};
};

int cmd_serve(const ServeArgs& a) {
  // Block the shutdown signals before any thread starts so only the waiter sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGINT);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  auto model = std::make_shared<const emllm::StressNetParams>(emllm::load_model(a.model));
  emllm::MonitorConfig mc;
  mc.shift_s = a.shift_s;
  auto monitor = std::make_shared<emllm::StressMonitor>(model, mc);

  auto llm_cfg = emllm::llm_config_from_env();
  if (!a.llm_url.empty()) llm_cfg.base_url = a.llm_url;
  if (!a.llm_model.empty()) llm_cfg.model = a.llm_model;
  llm_cfg.timeout_s = a.llm_timeout_s;
  llm_cfg.max_retries = a.llm_retries;
  auto llm = std::make_shared<emllm::HttpLlmClient>(llm_cfg);

  emllm::ChatServiceConfig cc;
  cc.data_dir = a.data_dir;
  emllm::ChatService service(cc, monitor, llm);

  emllm::ApiOptions opts;
  if (!a.static_dir.empty()) opts.static_dir = fs::path(a.static_dir);
  emllm::ApiServer server(service, opts);

  const auto [host, port] = emllm::parse_bind_addr(a.bind);
  if (!server.bind(host, port)) {
    log("cannot bind " + a.bind);
    return kRuntime;
  }
  log("llm endpoint " + llm_cfg.redacted().dump());
  log("listening on " + a.bind);

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    log(std::string("received ") + (sig == SIGTERM ? "SIGTERM" : "SIGINT") + ", shutting down");
    server.stop();
  });
  const bool ok = server.listen();
  // listen() can also return on its own; wake the waiter so it can be joined.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  log("stopped");
  return ok ? kOk : kRuntime;
}

bool is_data_error(const emllm::ModelError& e) {
  using K = emllm::ModelError::Kind;
  switch (e.kind()) {
    case K::kWindowTooShort:
    case K::kShapeMismatch:
    case K::kUnsupportedVersion:
    case K::kMalformedModel:
    case K::kSingleClass:
    case K::kEmptyInput:
    case K::kInvalidArgument:
      return true;
    default:
      return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wearable stress detection, streaming monitor and empathic chat service"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonOrTomlConfig>());
  app.set_config("--config", "", "TOML or JSON file with option values");

  SynthArgs synth;
  auto* sc = app.add_subcommand("synth", "Generate synthetic recordings");
  auto* spec_opt = sc->add_option("--spec", synth.spec_file, "JSON scenario file")
                       ->check(CLI::ExistingFile);
  sc->add_option("--subjects", synth.subjects, "Number of subjects")
      ->check(CLI::Range(1, 999))->excludes(spec_opt);
  sc->add_option("--duration", synth.duration_s, "Seconds per subject")
      ->check(CLI::PositiveNumber)->excludes(spec_opt);
  sc->add_option("--seed", synth.seed, "Base seed")->excludes(spec_opt);
  sc->add_flag("--calm", synth.calm, "Baseline and amusement only")->excludes(spec_opt);
  sc->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs tr;
  auto* tc = app.add_subcommand("train", "Train a model and report held-out metrics");
  tc->add_option("--data", tr.data, "Recording directories")->required()->check(CLI::ExistingDirectory);
  tc->add_option("--window", tr.window_s, "Window length in seconds")->check(CLI::PositiveNumber);
  tc->add_option("--shift", tr.shift_s, "Window shift in seconds")->check(CLI::PositiveNumber);
  tc->add_option("--epochs", tr.epochs, "Maximum epochs");
  tc->add_option("--batch", tr.batch, "Mini-batch size")->check(CLI::Range(1, 1 << 20));
  tc->add_option("--lr", tr.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  tc->add_option("--seed", tr.seed, "Seed for init, shuffling and splits");
  tc->add_option("--patience", tr.patience, "Early-stopping patience")->check(CLI::Range(1, 1 << 20));
  tc->add_option("--holdout", tr.holdout, "Test split: random windows or one subject")
      ->check(CLI::IsMember({"random", "subject"}));
  tc->add_option("--test-fraction", tr.test_fraction, "Held-out share for random holdout")
      ->check(CLI::Range(0.0, 0.9));
  tc->add_flag("--no-normalize", tr.no_normalize, "Skip per-channel z-scoring");
  tc->add_option("--out", tr.out, "Model output path")->required();

  EvalArgs ev;
  auto* ec = app.add_subcommand("eval", "Evaluate a model, or run leave-one-subject-out");
  ec->add_option("--model", ev.model, "Model file")->required();
  ec->add_option("--data", ev.data, "Recording directories")->required()->check(CLI::ExistingDirectory);
  ec->add_option("--shift", ev.shift_s, "Window shift in seconds")->check(CLI::PositiveNumber);
  ec->add_flag("--loso", ev.loso, "Retrain per held-out subject with the model's architecture");
  ec->add_option("--epochs", ev.epochs, "Maximum epochs per LOSO fold");
  ec->add_option("--seed", ev.seed, "Seed for LOSO training");

  ReplayArgs rp;
  auto* rc = app.add_subcommand("replay", "Stream a recording through the monitor");
  rc->add_option("--model", rp.model, "Model file")->required();
  rc->add_option("--data", rp.data, "Recording directory")->required()->check(CLI::ExistingDirectory);
  rc->add_option("--shift", rp.shift_s, "Prediction cadence in seconds")->check(CLI::PositiveNumber);
  rc->add_flag("--records", rp.records, "Also print every prediction");

  ServeArgs sv;
  auto* vc = app.add_subcommand("serve", "Run the chat HTTP API");
  vc->add_option("--model", sv.model, "Model file")->envname("EMLLM_MODEL_PATH")->required();
  vc->add_option("--bind", sv.bind, "host:port")->envname("EMLLM_BIND_ADDR");
  vc->add_option("--data-dir", sv.data_dir, "Session directory")->envname("EMLLM_DATA_DIR");
  vc->add_option("--static", sv.static_dir, "Directory served at /")->check(CLI::ExistingDirectory);
  vc->add_option("--llm-url", sv.llm_url, "Chat-completions base URL (overrides EMLLM_LLM_URL)");
  vc->add_option("--llm-model", sv.llm_model, "Model name (overrides EMLLM_LLM_MODEL)");
  vc->add_option("--llm-timeout", sv.llm_timeout_s, "Seconds per request")->check(CLI::PositiveNumber);
  vc->add_option("--llm-retries", sv.llm_retries, "Retries on transient failures")->check(CLI::Range(0, 10));
  vc->add_option("--shift", sv.shift_s, "Prediction cadence in seconds")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc_parse = app.exit(e);
    return rc_parse == 0 ? kOk : kUsage;
  }

  try {
    if (*sc) return cmd_synth(synth);
    if (*tc) return cmd_train(tr);
    if (*ec) return cmd_eval(ev);
    if (*rc) return cmd_replay(rp);
    if (*vc) return cmd_serve(sv);
  } catch (const emllm::DataError& e) {
    log(std::string("data error (") + emllm::to_string(e.kind()) + "): " + e.what());
    return kData;
  } catch (const emllm::ModelError& e) {
    log(std::string("model error (") + emllm::to_string(e.kind()) + "): " + e.what());
    return is_data_error(e) ? kData : kRuntime;
  } catch (const emllm::ChatError& e) {
    log(std::string("error (") + emllm::to_string(e.kind()) + "): " + e.what());
    return e.kind() == emllm::ChatError::Kind::kInvalidInput ? kUsage : kRuntime;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kRuntime;
  }
  return kUsage;
}
