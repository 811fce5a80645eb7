#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "emllm/stress_net.hpp"

namespace emllm {

using json = nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json arch_to_json(const ArchConfig& a) {
  json channels = json::array();
  for (const auto& c : a.channels) {
    channels.push_back({{"name", c.name},
                        {"rate_hz", c.rate_hz},
                        {"strides", c.strides},
                        {"filters", c.filters}});
  }
  return {{"channels", channels},     {"kernel", a.kernel},     {"pool_size", a.pool_size},
          {"pool_stride", a.pool_stride}, {"hidden", a.hidden}, {"window_s", a.window_s},
          {"threshold", a.threshold}};
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig a;
  for (const auto& c : j.at("channels")) {
    ChannelArch ch;
    ch.name = c.at("name").get<std::string>();
    ch.rate_hz = c.at("rate_hz").get<double>();
    ch.strides = c.at("strides").get<std::array<size_t, kConvLayers>>();
    ch.filters = c.at("filters").get<std::array<size_t, kConvLayers>>();
    a.channels.push_back(std::move(ch));
  }
  a.kernel = j.at("kernel").get<size_t>();
  a.pool_size = j.at("pool_size").get<size_t>();
  a.pool_stride = j.at("pool_stride").get<size_t>();
  a.hidden = j.at("hidden").get<size_t>();
  a.window_s = j.at("window_s").get<double>();
  a.threshold = j.value("threshold", 0.5);
  return a;
}

}  // namespace

std::string model_to_json(const StressNetParams& params) {
  json stats = json::object();
  for (const auto& [name, s] : params.norm_stats.channels) {
    stats[name] = {{"mean", s.mean}, {"stddev", s.stddev}};
  }
  json tensors = json::object();
  for (const auto& t : params.layout.tensors) {
    const auto first = params.values.begin() + static_cast<std::ptrdiff_t>(t.offset);
    tensors[t.name] = {{"shape", t.shape},
                       {"data", std::vector<double>(first, first + static_cast<std::ptrdiff_t>(t.size))}};
  }
  json doc = {{"format_version", kFormatVersion},
              {"arch", arch_to_json(params.arch)},
              {"normalize", params.normalize},
              {"norm_stats", stats},
              {"tensors", tensors}};
  return doc.dump();
}

StressNetParams model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ModelError(ModelError::Kind::kMalformedModel, std::string("model JSON: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw ModelError(ModelError::Kind::kUnsupportedVersion,
                       "unsupported model format_version " + std::to_string(version));
    }
    StressNetParams p;
    p.arch = arch_from_json(doc.at("arch"));
    p.layout = make_layout(p.arch);
    p.normalize = doc.value("normalize", true);
    for (const auto& [name, s] : doc.at("norm_stats").items()) {
      p.norm_stats.channels[name] =
          ChannelStats{s.at("mean").get<double>(), s.at("stddev").get<double>()};
    }
    if (p.normalize) {
      for (const auto& ch : p.arch.channels) {
        if (!p.norm_stats.channels.count(ch.name)) {
          throw ModelError(ModelError::Kind::kMalformedModel, "missing norm stats for " + ch.name);
        }
      }
    }
    const auto& tensors = doc.at("tensors");
    if (tensors.size() != p.layout.tensors.size()) {
      throw ModelError(ModelError::Kind::kShapeMismatch, "tensor count does not match arch");
    }
    p.values.assign(p.layout.n_params, 0.0);
    for (const auto& spec : p.layout.tensors) {
      if (!tensors.contains(spec.name)) {
        throw ModelError(ModelError::Kind::kShapeMismatch, "missing tensor " + spec.name);
      }
      const auto& t = tensors.at(spec.name);
      const auto shape = t.at("shape").get<std::vector<size_t>>();
      const auto data = t.at("data").get<std::vector<double>>();
      if (shape != spec.shape || data.size() != spec.size) {
        throw ModelError(ModelError::Kind::kShapeMismatch,
                         "tensor " + spec.name + " does not match the architecture");
      }
      for (size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
          throw ModelError(ModelError::Kind::kMalformedModel, "non-finite value in " + spec.name);
        }
        p.values[spec.offset + i] = data[i];
      }
    }
    return p;
  } catch (const json::exception& e) {
    throw ModelError(ModelError::Kind::kMalformedModel, std::string("model JSON: ") + e.what());
  }
}

void save_model(const StressNetParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelError(ModelError::Kind::kInvalidArgument, "cannot write " + path.string());
  out << model_to_json(params) << '\n';
  if (!out) throw ModelError(ModelError::Kind::kInvalidArgument, "failed writing " + path.string());
}

StressNetParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError(ModelError::Kind::kInvalidArgument, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace emllm
