#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace emllm {

// One physiological stream at its native rate. Sample k is at t0_s + k / rate_hz.
struct SignalChannel {
  std::string name;  // "bvp", "eda", "temp"
  double rate_hz{0.0};
  double t0_s{0.0};
  std::vector<double> samples;

  double duration_s() const { return static_cast<double>(samples.size()) / rate_hz; }
  double end_s() const { return t0_s + duration_s(); }
};

// Protocol codes used by the training dataset.
enum class Condition : int { kBaseline = 1, kStress = 2, kAmusement = 3 };

struct ConditionLabel {
  double t_start_s{0.0};
  double t_end_s{0.0};
  int condition{0};
};

struct Recording {
  std::string subject_id;
  std::vector<SignalChannel> channels;
  std::vector<ConditionLabel> labels;
};

struct LabeledWindow {
  std::string subject_id;
  double t_start_s{0.0};
  std::map<std::string, std::vector<double>> per_channel;
  int label{0};  // 1 = stressed
};

struct ChannelStats {
  double mean{0.0};
  double stddev{1.0};
};

struct NormStats {
  std::map<std::string, ChannelStats> channels;
};

inline constexpr double kMinStddev = 1e-8;

class DataError : public std::runtime_error {
 public:
  enum class Kind {
    kMissingFile,
    kMalformedRow,
    kMalformedInterval,
    kNonMonotonic,
    kRateMismatch,
    kNonIntegralSamples,
    kEmptyInput,
    kUnknownChannel,
    kInvalidArgument,
  };

  DataError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(DataError::Kind kind);

// Reads meta.json, one CSV per declared channel and the labels file.
// Throws DataError; never returns partially parsed data.
Recording load_recording(const std::filesystem::path& dir);

bool is_usable_condition(int condition);

// Number of samples a window_s-long slice occupies at rate_hz; throws
// kNonIntegralSamples when that is not an integer.
size_t samples_per_window(double window_s, double rate_hz);

// Sliding windows on the grid origin + k * shift_s, where origin is the
// latest channel start. A window is kept only when it lies inside one label
// interval whose condition is usable; label = 1 for the stress condition.
std::vector<LabeledWindow> segment_windows(const std::string& subject_id,
                                           const std::vector<SignalChannel>& channels,
                                           const std::vector<ConditionLabel>& labels,
                                           double window_s, double shift_s);

inline std::vector<LabeledWindow> segment_windows(const Recording& rec, double window_s,
                                                  double shift_s) {
  return segment_windows(rec.subject_id, rec.channels, rec.labels, window_s, shift_s);
}

// Copies the samples of [t_start_s, t_start_s + window_s) out of every channel.
// Throws when the interval is not fully covered or not aligned to a sample.
std::map<std::string, std::vector<double>> slice_channels(
    const std::vector<SignalChannel>& channels, double t_start_s, double window_s);

NormStats fit_norm_stats(const std::vector<LabeledWindow>& windows);
NormStats fit_norm_stats(const std::vector<const LabeledWindow*>& windows);

LabeledWindow normalize(const LabeledWindow& window, const NormStats& stats);
LabeledWindow denormalize(const LabeledWindow& window, const NormStats& stats);

}  // namespace emllm
