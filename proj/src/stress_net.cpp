#include "emllm/stress_net.hpp"

#include <algorithm>
#include <cmath>

#include "emllm/rng.hpp"
#include "parallel.hpp"

namespace emllm {

namespace {

constexpr size_t kGradChunks = 8;

}  // namespace

const char* to_string(ModelError::Kind kind) {
  switch (kind) {
    case ModelError::Kind::kWindowTooShort: return "WindowTooShort";
    case ModelError::Kind::kShapeMismatch: return "ShapeMismatch";
    case ModelError::Kind::kUnsupportedVersion: return "UnsupportedVersion";
    case ModelError::Kind::kMalformedModel: return "MalformedModel";
    case ModelError::Kind::kSingleClass: return "SingleClass";
    case ModelError::Kind::kDivergence: return "Divergence";
    case ModelError::Kind::kEmptyInput: return "EmptyInput";
    case ModelError::Kind::kMissingForwardCache: return "MissingForwardCache";
    case ModelError::Kind::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

ArchConfig make_arch(const std::map<std::string, double>& rates_hz, double window_s,
                     const ArchOptions& options) {
  if (rates_hz.empty()) throw ModelError(ModelError::Kind::kInvalidArgument, "no channels");
  double min_rate = rates_hz.begin()->second;
  for (const auto& [name, rate] : rates_hz) {
    if (!(rate > 0.0)) {
      throw ModelError(ModelError::Kind::kInvalidArgument, name + ": rate must be positive");
    }
    min_rate = std::min(min_rate, rate);
  }
  ArchConfig arch;
  arch.pool_size = options.pool_size;
  arch.pool_stride = options.pool_stride;
  arch.hidden = options.hidden;
  arch.window_s = window_s;
  arch.threshold = options.threshold;
  for (const auto& [name, rate] : rates_hz) {
    ChannelArch ch;
    ch.name = name;
    ch.rate_hz = rate;
    const auto ratio = static_cast<size_t>(std::llround(rate / min_rate));
    ch.strides = {std::max<size_t>(1, ratio), options.deep_stride, options.deep_stride};
    ch.filters = options.filters;
    arch.channels.push_back(ch);
  }
  validate_arch(arch);
  return arch;
}

NetLayout make_layout(const ArchConfig& arch) {
  if (arch.kernel != 3) {
    throw ModelError(ModelError::Kind::kInvalidArgument, "conv kernel size must be 3");
  }
  if (arch.channels.empty()) throw ModelError(ModelError::Kind::kInvalidArgument, "no channels");
  if (arch.hidden < 1 || arch.pool_size < 1 || arch.pool_stride < 1) {
    throw ModelError(ModelError::Kind::kInvalidArgument, "hidden and pool sizes must be >= 1");
  }
  for (size_t i = 1; i < arch.channels.size(); ++i) {
    if (!(arch.channels[i - 1].name < arch.channels[i].name)) {
      throw ModelError(ModelError::Kind::kInvalidArgument,
                       "channels must be unique and sorted by name");
    }
  }

  NetLayout lay;
  size_t offset = 0;
  auto add = [&](const std::string& name, std::vector<size_t> shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    lay.tensors.push_back(TensorSpec{name, std::move(shape), offset, n});
    offset += n;
    return offset - n;
  };

  for (const auto& ch : arch.channels) {
    NetLayout::Stack st;
    st.name = ch.name;
    try {
      st.in_len = samples_per_window(arch.window_s, ch.rate_hz);
    } catch (const DataError& e) {
      throw ModelError(ModelError::Kind::kInvalidArgument, e.what());
    }
    size_t len = st.in_len;
    size_t in_ch = 1;
    for (size_t l = 0; l < kConvLayers; ++l) {
      if (ch.strides[l] < 1 || ch.filters[l] < 1) {
        throw ModelError(ModelError::Kind::kInvalidArgument, ch.name + ": stride/filters < 1");
      }
      if (len < arch.kernel) {
        throw ModelError(ModelError::Kind::kWindowTooShort,
                         ch.name + ": conv layer " + std::to_string(l + 1) + " input length " +
                             std::to_string(len) + " < kernel");
      }
      st.conv[l] = nn::ConvGeom{in_ch, ch.filters[l], len, arch.kernel, ch.strides[l]};
      len = st.conv[l].out_len();
      in_ch = ch.filters[l];
      const std::string prefix = ch.name + ".conv" + std::to_string(l);
      st.w_off[l] = add(prefix + ".weight", {st.conv[l].out_ch, st.conv[l].in_ch, arch.kernel});
      st.b_off[l] = add(prefix + ".bias", {st.conv[l].out_ch});
    }
    if (len < arch.pool_size) {
      throw ModelError(ModelError::Kind::kWindowTooShort,
                       ch.name + ": pooling input length " + std::to_string(len) + " < pool size");
    }
    st.pool = nn::PoolGeom{in_ch, len, arch.pool_size, arch.pool_stride};
    st.features = in_ch * st.pool.out_len();
    lay.head_in += st.features;
    lay.stacks.push_back(std::move(st));
  }
  lay.fc0 = nn::DenseGeom{lay.head_in, arch.hidden};
  lay.fc1 = nn::DenseGeom{arch.hidden, 1};
  lay.fc0_w = add("head.fc0.weight", {arch.hidden, lay.head_in});
  lay.fc0_b = add("head.fc0.bias", {arch.hidden});
  lay.fc1_w = add("head.fc1.weight", {1, arch.hidden});
  lay.fc1_b = add("head.fc1.bias", {1});
  lay.n_params = offset;
  return lay;
}

void validate_arch(const ArchConfig& arch) { (void)make_layout(arch); }

std::span<double> StressNetParams::tensor(const std::string& name) {
  for (const auto& t : layout.tensors) {
    if (t.name == name) return {values.data() + t.offset, t.size};
  }
  throw ModelError(ModelError::Kind::kInvalidArgument, "no tensor named " + name);
}

std::span<const double> StressNetParams::tensor(const std::string& name) const {
  return const_cast<StressNetParams*>(this)->tensor(name);
}

bool operator==(const StressNetParams& a, const StressNetParams& b) {
  if (!(a.arch == b.arch) || a.normalize != b.normalize || a.values != b.values) return false;
  if (a.norm_stats.channels.size() != b.norm_stats.channels.size()) return false;
  for (const auto& [name, s] : a.norm_stats.channels) {
    auto it = b.norm_stats.channels.find(name);
    if (it == b.norm_stats.channels.end() || it->second.mean != s.mean ||
        it->second.stddev != s.stddev) {
      return false;
    }
  }
  return true;
}

StressNetParams build_network(const ArchConfig& arch, uint64_t seed) {
  StressNetParams p;
  p.arch = arch;
  p.layout = make_layout(arch);
  p.values.assign(p.layout.n_params, 0.0);
  // Identity stats until training fits real ones.
  for (const auto& ch : arch.channels) p.norm_stats.channels[ch.name] = ChannelStats{0.0, 1.0};
  Rng rng(seed);
  for (const auto& t : p.layout.tensors) {
    if (t.shape.size() < 2) continue;  // biases start at zero
    size_t fan_in = 1;
    for (size_t d = 1; d < t.shape.size(); ++d) fan_in *= t.shape[d];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (size_t i = 0; i < t.size; ++i) p.values[t.offset + i] = rng.uniform(-bound, bound);
  }
  return p;
}

Workspace::Workspace(const NetLayout& layout) {
  for (const auto& st : layout.stacks) {
    StackBuf b;
    b.input.resize(st.in_len);
    for (size_t l = 0; l < kConvLayers; ++l) {
      b.act[l].resize(st.conv[l].out_ch * st.conv[l].out_len());
      b.dact[l].resize(b.act[l].size());
    }
    b.pooled.resize(st.features);
    b.argmax.resize(st.features);
    stacks_.push_back(std::move(b));
  }
  features_.resize(layout.head_in);
  dfeatures_.resize(layout.head_in);
  hidden_.resize(layout.fc0.out);
  dhidden_.resize(layout.fc0.out);
}

void Workspace::load(const StressNetParams& params, const LabeledWindow& window, bool apply_norm) {
  const auto& lay = params.layout;
  if (stacks_.size() != lay.stacks.size()) {
    throw ModelError(ModelError::Kind::kShapeMismatch, "workspace built for another layout");
  }
  for (size_t s = 0; s < lay.stacks.size(); ++s) {
    const auto& name = lay.stacks[s].name;
    auto it = window.per_channel.find(name);
    if (it == window.per_channel.end()) {
      throw ModelError(ModelError::Kind::kShapeMismatch, "window lacks channel " + name);
    }
    if (it->second.size() != lay.stacks[s].in_len) {
      throw ModelError(ModelError::Kind::kShapeMismatch,
                       name + ": expected " + std::to_string(lay.stacks[s].in_len) +
                           " samples, got " + std::to_string(it->second.size()));
    }
    auto& in = stacks_[s].input;
    if (apply_norm && params.normalize) {
      auto st = params.norm_stats.channels.find(name);
      if (st == params.norm_stats.channels.end()) {
        throw ModelError(ModelError::Kind::kShapeMismatch, "model has no stats for " + name);
      }
      const double mean = st->second.mean;
      const double sd = st->second.stddev;
      for (size_t i = 0; i < in.size(); ++i) in[i] = (it->second[i] - mean) / sd;
    } else {
      std::copy(it->second.begin(), it->second.end(), in.begin());
    }
  }
  has_forward_ = false;
}

double Workspace::forward(const StressNetParams& params) {
  const auto& lay = params.layout;
  const double* v = params.values.data();
  size_t feat_off = 0;
  for (size_t s = 0; s < lay.stacks.size(); ++s) {
    const auto& st = lay.stacks[s];
    auto& b = stacks_[s];
    std::span<const double> x = b.input;
    for (size_t l = 0; l < kConvLayers; ++l) {
      const auto& g = st.conv[l];
      nn::conv1d_forward(g, x, {v + st.w_off[l], g.weight_count()}, {v + st.b_off[l], g.out_ch},
                         b.act[l]);
      nn::relu_inplace(b.act[l]);
      require_finite(b.act[l], st.name + " conv" + std::to_string(l));
      x = b.act[l];
    }
    nn::maxpool_forward(st.pool, x, b.pooled, b.argmax);
    std::copy(b.pooled.begin(), b.pooled.end(), features_.begin() + static_cast<long>(feat_off));
    feat_off += st.features;
  }
  nn::dense_forward(lay.fc0, features_, {v + lay.fc0_w, lay.fc0.in * lay.fc0.out},
                    {v + lay.fc0_b, lay.fc0.out}, hidden_);
  nn::relu_inplace(hidden_);
  double z = 0.0;
  nn::dense_forward(lay.fc1, hidden_, {v + lay.fc1_w, lay.fc1.in}, {v + lay.fc1_b, 1}, {&z, 1});
  if (!std::isfinite(z)) throw NonFiniteError("stress net logit is not finite");
  z_ = z;
  p_ = nn::sigmoid(z);
  has_forward_ = true;
  return p_;
}

void Workspace::backward(const StressNetParams& params, double dlogit, std::span<double> grads) {
  if (!has_forward_) {
    throw ModelError(ModelError::Kind::kMissingForwardCache, "backward called before forward");
  }
  const auto& lay = params.layout;
  if (grads.size() != lay.n_params) {
    throw ModelError(ModelError::Kind::kShapeMismatch, "gradient buffer has wrong size");
  }
  const double* v = params.values.data();
  double* g = grads.data();

  nn::dense_backward(lay.fc1, hidden_, {v + lay.fc1_w, lay.fc1.in}, {&dlogit, 1}, dhidden_,
                     {g + lay.fc1_w, lay.fc1.in}, {g + lay.fc1_b, 1});
  nn::relu_backward(hidden_, dhidden_);
  nn::dense_backward(lay.fc0, features_, {v + lay.fc0_w, lay.fc0.in * lay.fc0.out}, dhidden_,
                     dfeatures_, {g + lay.fc0_w, lay.fc0.in * lay.fc0.out},
                     {g + lay.fc0_b, lay.fc0.out});

  size_t feat_off = 0;
  for (size_t s = 0; s < lay.stacks.size(); ++s) {
    const auto& st = lay.stacks[s];
    auto& b = stacks_[s];
    nn::maxpool_backward(st.pool, {dfeatures_.data() + feat_off, st.features}, b.argmax,
                         b.dact[kConvLayers - 1]);
    feat_off += st.features;
    for (size_t l = kConvLayers; l-- > 0;) {
      const auto& cg = st.conv[l];
      nn::relu_backward(b.act[l], b.dact[l]);
      std::span<const double> x = l == 0 ? std::span<const double>(b.input) : b.act[l - 1];
      std::span<double> dx = l == 0 ? std::span<double>() : std::span<double>(b.dact[l - 1]);
      nn::conv1d_backward(cg, x, {v + st.w_off[l], cg.weight_count()}, b.dact[l], dx,
                          {g + st.w_off[l], cg.weight_count()}, {g + st.b_off[l], cg.out_ch});
    }
  }
}

double forward(const StressNetParams& params, const LabeledWindow& normalized) {
  Workspace ws(params.layout);
  ws.load(params, normalized, false);
  return ws.forward(params);
}

double predict_probability(const StressNetParams& params, const LabeledWindow& raw) {
  Workspace ws(params.layout);
  ws.load(params, raw, true);
  return ws.forward(params);
}

std::vector<double> predict_probabilities(const StressNetParams& params,
                                          const std::vector<LabeledWindow>& raw) {
  std::vector<const LabeledWindow*> ptrs;
  ptrs.reserve(raw.size());
  for (const auto& w : raw) ptrs.push_back(&w);
  return predict_probabilities(params, ptrs);
}

std::vector<double> predict_probabilities(const StressNetParams& params,
                                          std::span<const LabeledWindow* const> raw) {
  std::vector<double> out(raw.size());
  detail::ExceptionSlot err;
  const long long n = static_cast<long long>(raw.size());
#pragma omp parallel
  {
    Workspace ws(params.layout);
#pragma omp for schedule(static)
    for (long long i = 0; i < n; ++i) {
      err.run([&] {
        ws.load(params, *raw[static_cast<size_t>(i)], true);
        out[static_cast<size_t>(i)] = ws.forward(params);
      });
    }
  }
  err.rethrow();
  return out;
}

double batch_gradient(const StressNetParams& params, std::span<const LabeledWindow* const> batch,
                      bool apply_norm, std::span<double> grads) {
  if (batch.empty()) throw ModelError(ModelError::Kind::kEmptyInput, "empty batch");
  const size_t n_params = params.layout.n_params;
  if (grads.size() != n_params) {
    throw ModelError(ModelError::Kind::kShapeMismatch, "gradient buffer has wrong size");
  }
  const size_t bsz = batch.size();
  const size_t chunks = std::min(bsz, kGradChunks);
  const double inv_b = 1.0 / static_cast<double>(bsz);
  std::vector<std::vector<double>> partial(chunks);
  std::vector<double> losses(bsz, 0.0);
  detail::ExceptionSlot err;

#pragma omp parallel for schedule(static, 1)
  for (long long c = 0; c < static_cast<long long>(chunks); ++c) {
    err.run([&] {
      const size_t cc = static_cast<size_t>(c);
      auto& acc = partial[cc];
      acc.assign(n_params, 0.0);
      Workspace ws(params.layout);
      const size_t lo = cc * bsz / chunks;
      const size_t hi = (cc + 1) * bsz / chunks;
      for (size_t i = lo; i < hi; ++i) {
        ws.load(params, *batch[i], apply_norm);
        const double p = ws.forward(params);
        const int y = batch[i]->label;
        losses[i] = nn::bce_loss(p, y).loss;
        ws.backward(params, (p - static_cast<double>(y)) * inv_b, acc);
      }
    });
  }
  err.rethrow();

  const long long np = static_cast<long long>(n_params);
#pragma omp parallel for schedule(static) if (np > (1 << 16))
  for (long long j = 0; j < np; ++j) {
    double s = 0.0;
    for (size_t c = 0; c < chunks; ++c) s += partial[c][static_cast<size_t>(j)];
    grads[static_cast<size_t>(j)] = s;
  }
  double loss = 0.0;
  for (double l : losses) loss += l;
  return loss * inv_b;
}

double batch_loss(const StressNetParams& params, std::span<const LabeledWindow* const> batch,
                  bool apply_norm) {
  if (batch.empty()) throw ModelError(ModelError::Kind::kEmptyInput, "empty batch");
  std::vector<double> losses(batch.size());
  detail::ExceptionSlot err;
  const long long n = static_cast<long long>(batch.size());
#pragma omp parallel
  {
    Workspace ws(params.layout);
#pragma omp for schedule(static)
    for (long long i = 0; i < n; ++i) {
      err.run([&] {
        const auto& w = *batch[static_cast<size_t>(i)];
        ws.load(params, w, apply_norm);
        losses[static_cast<size_t>(i)] = nn::bce_loss(ws.forward(params), w.label).loss;
      });
    }
  }
  err.rethrow();
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(batch.size());
}

}  // namespace emllm
