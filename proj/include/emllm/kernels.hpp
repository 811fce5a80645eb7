#pragma once

// Forward/backward kernels for the fixed layer set of the stress network.
//
// Two implementations share one interface:
//   emllm::nn             OpenMP-parallel (used by training and inference)
//   emllm::nn::reference  plain serial loops, kept for tests and benchmarks
//
// Both accumulate every output element in the same order, so their results
// are bit-identical; the parallel split is only ever across independent
// output rows.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "emllm/tensor.hpp"

namespace emllm::nn {

// floor((length - window) / stride) + 1; throws ShapeError when length < window
// or stride < 1.
size_t output_length(size_t length, size_t window, size_t stride);

struct ConvGeom {
  size_t in_ch{1};
  size_t out_ch{1};
  size_t in_len{0};
  size_t kernel{3};
  size_t stride{1};

  size_t out_len() const { return output_length(in_len, kernel, stride); }
  size_t weight_count() const { return out_ch * in_ch * kernel; }
};

struct PoolGeom {
  size_t channels{1};
  size_t in_len{0};
  size_t size{1};
  size_t stride{1};

  size_t out_len() const { return output_length(in_len, size, stride); }
};

struct DenseGeom {
  size_t in{0};
  size_t out{0};
};

// Layout: x (in_ch, in_len), w (out_ch, in_ch, kernel), b (out_ch), y (out_ch, out_len).
void conv1d_forward(const ConvGeom& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y);
// dw, db accumulate; dx is overwritten (pass an empty span to skip it).
void conv1d_backward(const ConvGeom& g, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> db);

// argmax holds flat indices into x; ties go to the lowest index.
void maxpool_forward(const PoolGeom& g, std::span<const double> x, std::span<double> y,
                     std::span<uint32_t> argmax);
void maxpool_backward(const PoolGeom& g, std::span<const double> dy,
                      std::span<const uint32_t> argmax, std::span<double> dx);

// W is (out, in) row-major.
void dense_forward(const DenseGeom& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y);
void dense_backward(const DenseGeom& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                    std::span<double> db);

void relu_inplace(std::span<double> x);
// grad[i] = 0 where activation[i] <= 0.
void relu_backward(std::span<const double> activation, std::span<double> grad);

double relu(double x);
double sigmoid(double x);

inline constexpr double kProbClamp = 1e-12;

// Binary cross-entropy of a single prediction with p clamped to
// [1e-12, 1 - 1e-12]; grad is dL/dp at the clamped p.
struct BceResult {
  double loss;
  double grad;
};
BceResult bce_loss(double p, int y);
double bce_mean(std::span<const double> p, std::span<const int> y);

// Value-level convenience wrappers.
Tensor1 conv1d_forward(const Tensor1& x, const std::vector<double>& w, size_t out_ch,
                       size_t kernel, const std::vector<double>& b, size_t stride);
std::pair<Tensor1, std::vector<uint32_t>> maxpool1d(const Tensor1& x, size_t size, size_t stride);
std::vector<double> dense_forward(const std::vector<double>& x,
                                  const std::vector<std::vector<double>>& w,
                                  const std::vector<double>& b);
Tensor1 relu(const Tensor1& x);
Tensor1 sigmoid(const Tensor1& x);

namespace reference {

void conv1d_forward(const ConvGeom& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y);
void conv1d_backward(const ConvGeom& g, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> db);
void maxpool_forward(const PoolGeom& g, std::span<const double> x, std::span<double> y,
                     std::span<uint32_t> argmax);
void maxpool_backward(const PoolGeom& g, std::span<const double> dy,
                      std::span<const uint32_t> argmax, std::span<double> dx);
void dense_forward(const DenseGeom& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y);
void dense_backward(const DenseGeom& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                    std::span<double> db);

}  // namespace reference

}  // namespace emllm::nn
