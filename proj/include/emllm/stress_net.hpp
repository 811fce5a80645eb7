#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "emllm/kernels.hpp"
#include "emllm/signal_store.hpp"

namespace emllm {

class ModelError : public std::runtime_error {
 public:
  enum class Kind {
    kWindowTooShort,
    kShapeMismatch,
    kUnsupportedVersion,
    kMalformedModel,
    kSingleClass,
    kDivergence,
    kEmptyInput,
    kMissingForwardCache,
    kInvalidArgument,
  };

  ModelError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(ModelError::Kind kind);

inline constexpr size_t kConvLayers = 3;

struct ChannelArch {
  std::string name;
  double rate_hz{0.0};
  std::array<size_t, kConvLayers> strides{1, 2, 2};
  std::array<size_t, kConvLayers> filters{16, 32, 64};

  bool operator==(const ChannelArch&) const = default;
};

struct ArchConfig {
  std::vector<ChannelArch> channels;  // sorted by name
  size_t kernel{3};
  size_t pool_size{4};
  size_t pool_stride{4};
  size_t hidden{128};
  double window_s{60.0};
  double threshold{0.5};

  bool operator==(const ArchConfig&) const = default;
};

// Knobs for make_arch; the defaults are the shipped model.
struct ArchOptions {
  std::array<size_t, kConvLayers> filters{16, 32, 64};
  size_t deep_stride{2};
  size_t pool_size{4};
  size_t pool_stride{4};
  size_t hidden{128};
  double threshold{0.5};
};

// First-layer stride of each channel is max(1, round(rate / slowest rate)), so
// faster signals are decimated proportionally; layers 2 and 3 use deep_stride.
ArchConfig make_arch(const std::map<std::string, double>& rates_hz, double window_s,
                     const ArchOptions& options = {});

// Throws ModelError on anything make_layout would reject or a kernel != 3.
void validate_arch(const ArchConfig& arch);

struct TensorSpec {
  std::string name;
  std::vector<size_t> shape;
  size_t offset{0};
  size_t size{0};
};

// Derived shapes and flat-parameter offsets.
struct NetLayout {
  struct Stack {
    std::string name;
    size_t in_len{0};
    std::array<nn::ConvGeom, kConvLayers> conv;
    nn::PoolGeom pool;
    size_t features{0};
    std::array<size_t, kConvLayers> w_off{};
    std::array<size_t, kConvLayers> b_off{};
  };

  std::vector<Stack> stacks;
  nn::DenseGeom fc0;
  nn::DenseGeom fc1;
  size_t fc0_w{0}, fc0_b{0}, fc1_w{0}, fc1_b{0};
  size_t head_in{0};
  size_t n_params{0};
  std::vector<TensorSpec> tensors;
};

NetLayout make_layout(const ArchConfig& arch);

struct StressNetParams {
  ArchConfig arch;
  bool normalize{true};
  NormStats norm_stats;
  NetLayout layout;
  std::vector<double> values;  // all weights and biases, offsets per layout

  std::span<double> tensor(const std::string& name);
  std::span<const double> tensor(const std::string& name) const;
};

bool operator==(const StressNetParams& a, const StressNetParams& b);

// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases, seeded.
StressNetParams build_network(const ArchConfig& arch, uint64_t seed);

// Activations and gradient scratch for one sample; reuse across calls.
class Workspace {
 public:
  explicit Workspace(const NetLayout& layout);

  // Copies window samples into the input buffers, z-scoring with the model's
  // stats when apply_norm is set.
  void load(const StressNetParams& params, const LabeledWindow& window, bool apply_norm);
  double forward(const StressNetParams& params);
  // Accumulates dL/dparams into grads given dL/dlogit.
  void backward(const StressNetParams& params, double dlogit, std::span<double> grads);

  double probability() const { return p_; }

 private:
  struct StackBuf {
    std::vector<double> input;
    std::array<std::vector<double>, kConvLayers> act;
    std::vector<double> pooled;
    std::vector<uint32_t> argmax;
    std::array<std::vector<double>, kConvLayers> dact;
    std::vector<double> dpool_in;
  };

  std::vector<StackBuf> stacks_;
  std::vector<double> features_;
  std::vector<double> hidden_;
  std::vector<double> dfeatures_;
  std::vector<double> dhidden_;
  double z_{0.0};
  double p_{0.5};
  bool has_forward_{false};
};

// Probability of "stressed" for an already normalized window.
double forward(const StressNetParams& params, const LabeledWindow& normalized);
// Applies the model's normalization first.
double predict_probability(const StressNetParams& params, const LabeledWindow& raw);
std::vector<double> predict_probabilities(const StressNetParams& params,
                                          std::span<const LabeledWindow* const> raw);
std::vector<double> predict_probabilities(const StressNetParams& params,
                                          const std::vector<LabeledWindow>& raw);

// Mean BCE over the batch; grads (n_params) is overwritten with its gradient.
// Samples are grouped into a fixed number of chunks whose partial sums are
// reduced in order, so the result does not depend on the thread count.
double batch_gradient(const StressNetParams& params, std::span<const LabeledWindow* const> batch,
                      bool apply_norm, std::span<double> grads);
double batch_loss(const StressNetParams& params, std::span<const LabeledWindow* const> batch,
                  bool apply_norm);

void save_model(const StressNetParams& params, const std::filesystem::path& path);
StressNetParams load_model(const std::filesystem::path& path);
std::string model_to_json(const StressNetParams& params);
StressNetParams model_from_json(const std::string& text);

}  // namespace emllm
