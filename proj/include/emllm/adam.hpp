#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace emllm::nn {

struct AdamConfig {
  double lr{1e-3};
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};
};

struct AdamState {
  AdamConfig config;
  uint64_t step{0};
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  AdamState(AdamConfig cfg, size_t n_params) : config(cfg), m(n_params, 0.0), v(n_params, 0.0) {}
};

// One bias-corrected Adam update of params in place. Throws ShapeError when
// params, grads and the moment buffers are not the same length.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace emllm::nn
