// Serial reference kernels against the OpenMP kernels on model-sized shapes.

#include <benchmark/benchmark.h>

#include <vector>

#include "emllm/kernels.hpp"
#include "emllm/rng.hpp"
#include "emllm/stress_net.hpp"

using namespace emllm;

namespace {

std::vector<double> random_values(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Arg(0): first bvp layer (1 -> 16, 3840 samples, stride 16). Arg(1): second
// layer (16 -> 32, stride 2). Arg(2): third layer (32 -> 64, stride 2).
nn::ConvGeom conv_shape(int64_t which) {
  switch (which) {
    case 0: return {1, 16, 3840, 3, 16};
    case 1: return {16, 32, 240, 3, 2};
    default: return {32, 64, 119, 3, 2};
  }
}

template <bool Reference>
void BM_Conv1dForward(benchmark::State& state) {
  const auto g = conv_shape(state.range(0));
  const auto x = random_values(g.in_ch * g.in_len, 1);
  const auto w = random_values(g.weight_count(), 2);
  const auto b = random_values(g.out_ch, 3);
  std::vector<double> y(g.out_ch * g.out_len());
  for (auto _ : state) {
    if constexpr (Reference) {
      nn::reference::conv1d_forward(g, x, w, b, y);
    } else {
      nn::conv1d_forward(g, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(y.size() * g.in_ch * g.kernel));
}

template <bool Reference>
void BM_Conv1dBackward(benchmark::State& state) {
  const auto g = conv_shape(state.range(0));
  const auto x = random_values(g.in_ch * g.in_len, 1);
  const auto w = random_values(g.weight_count(), 2);
  const auto dy = random_values(g.out_ch * g.out_len(), 3);
  std::vector<double> dx(x.size()), dw(w.size()), db(g.out_ch);
  for (auto _ : state) {
    if constexpr (Reference) {
      nn::reference::conv1d_backward(g, x, w, dy, dx, dw, db);
    } else {
      nn::conv1d_backward(g, x, w, dy, dx, dw, db);
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

template <bool Reference>
void BM_DenseForward(benchmark::State& state) {
  const nn::DenseGeom g{static_cast<size_t>(state.range(0)), static_cast<size_t>(state.range(1))};
  const auto x = random_values(g.in, 1);
  const auto w = random_values(g.in * g.out, 2);
  const auto b = random_values(g.out, 3);
  std::vector<double> y(g.out);
  for (auto _ : state) {
    if constexpr (Reference) {
      nn::reference::dense_forward(g, x, w, b, y);
    } else {
      nn::dense_forward(g, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(g.in * g.out));
}

template <bool Reference>
void BM_DenseBackward(benchmark::State& state) {
  const nn::DenseGeom g{static_cast<size_t>(state.range(0)), static_cast<size_t>(state.range(1))};
  const auto x = random_values(g.in, 1);
  const auto w = random_values(g.in * g.out, 2);
  const auto dy = random_values(g.out, 3);
  std::vector<double> dx(g.in), dw(w.size()), db(g.out);
  for (auto _ : state) {
    if constexpr (Reference) {
      nn::reference::dense_backward(g, x, w, dy, dx, dw, db);
    } else {
      nn::dense_backward(g, x, w, dy, dx, dw, db);
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

// Full mean-BCE gradient of the production network over a batch of 32.
void BM_BatchGradient(benchmark::State& state) {
  const auto arch = make_arch({{"bvp", 64.0}, {"eda", 4.0}, {"temp", 4.0}}, 60.0);
  auto params = build_network(arch, 7);
  Rng rng(11);
  std::vector<LabeledWindow> windows(32);
  for (size_t i = 0; i < windows.size(); ++i) {
    windows[i].label = static_cast<int>(i % 2);
    for (const auto& c : arch.channels) {
      auto& v = windows[i].per_channel[c.name];
      v.resize(static_cast<size_t>(c.rate_hz * arch.window_s));
      for (auto& s : v) s = rng.normal();
    }
  }
  std::vector<const LabeledWindow*> batch;
  for (const auto& w : windows) batch.push_back(&w);
  std::vector<double> grads(params.values.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(batch_gradient(params, batch, false, grads));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(batch.size()));
}

}  // namespace

BENCHMARK(BM_Conv1dForward<true>)->Name("conv1d_forward/reference")->DenseRange(0, 2);
BENCHMARK(BM_Conv1dForward<false>)->Name("conv1d_forward/openmp")->DenseRange(0, 2);
BENCHMARK(BM_Conv1dBackward<true>)->Name("conv1d_backward/reference")->DenseRange(0, 2);
BENCHMARK(BM_Conv1dBackward<false>)->Name("conv1d_backward/openmp")->DenseRange(0, 2);
BENCHMARK(BM_DenseForward<true>)->Name("dense_forward/reference")->Args({2688, 128})->Args({128, 1});
BENCHMARK(BM_DenseForward<false>)->Name("dense_forward/openmp")->Args({2688, 128})->Args({128, 1});
BENCHMARK(BM_DenseBackward<true>)->Name("dense_backward/reference")->Args({2688, 128});
BENCHMARK(BM_DenseBackward<false>)->Name("dense_backward/openmp")->Args({2688, 128});
BENCHMARK(BM_BatchGradient)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
