#pragma once

#include <span>
#include <string>

#include "emllm/kernels.hpp"

namespace emllm::nn::detail {

inline void expect_size(size_t actual, size_t expected, const char* what) {
  if (actual != expected) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) +
                     " values, got " + std::to_string(actual));
  }
}

inline void check_conv(const ConvGeom& g, size_t x, size_t w, size_t b, size_t y) {
  const size_t out_len = g.out_len();
  expect_size(x, g.in_ch * g.in_len, "conv1d input");
  expect_size(w, g.weight_count(), "conv1d weight");
  expect_size(b, g.out_ch, "conv1d bias");
  expect_size(y, g.out_ch * out_len, "conv1d output");
}

inline void check_pool(const PoolGeom& g, size_t x, size_t y) {
  if (g.size < 1) throw ShapeError("maxpool size must be >= 1");
  expect_size(x, g.channels * g.in_len, "maxpool input");
  expect_size(y, g.channels * g.out_len(), "maxpool output");
}

inline void check_dense(const DenseGeom& g, size_t x, size_t w, size_t b, size_t y) {
  expect_size(x, g.in, "dense input");
  expect_size(w, g.in * g.out, "dense weight");
  expect_size(b, g.out, "dense bias");
  expect_size(y, g.out, "dense output");
}

}  // namespace emllm::nn::detail
