#include "emllm/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "kernel_checks.hpp"

namespace emllm {

Tensor1::Tensor1(size_t c, size_t l, std::vector<double> values)
    : channels(c), length(l), data(std::move(values)) {
  if (data.size() != c * l) throw ShapeError("Tensor1: data length != channels * length");
}

void require_finite(std::span<const double> values, const std::string& what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError(what + ": non-finite value");
  }
}

}  // namespace emllm

namespace emllm::nn {

namespace {

// Below this many multiply-adds a kernel runs on the calling thread.
constexpr size_t kParallelWork = 1 << 15;
constexpr size_t kDenseBlock = 256;

}  // namespace

size_t output_length(size_t length, size_t window, size_t stride) {
  if (stride < 1) throw ShapeError("stride must be >= 1");
  if (window < 1) throw ShapeError("window must be >= 1");
  if (length < window) {
    throw ShapeError("input length " + std::to_string(length) + " shorter than window " +
                     std::to_string(window));
  }
  return (length - window) / stride + 1;
}

void conv1d_forward(const ConvGeom& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  detail::check_conv(g, x.size(), w.size(), b.size(), y.size());
  const size_t out_len = g.out_len();
  const size_t work = g.out_ch * out_len * g.in_ch * g.kernel;
  const long long n_out = static_cast<long long>(g.out_ch);
  const long long n_len = static_cast<long long>(out_len);
#pragma omp parallel for collapse(2) schedule(static) if (work > kParallelWork)
  for (long long o = 0; o < n_out; ++o) {
    for (long long j = 0; j < n_len; ++j) {
      const size_t oo = static_cast<size_t>(o);
      const size_t jj = static_cast<size_t>(j);
      double acc = b[oo];
      for (size_t i = 0; i < g.in_ch; ++i) {
        const double* wi = w.data() + (oo * g.in_ch + i) * g.kernel;
        const double* xi = x.data() + i * g.in_len + jj * g.stride;
        for (size_t t = 0; t < g.kernel; ++t) acc += wi[t] * xi[t];
      }
      y[oo * out_len + jj] = acc;
    }
  }
}

void conv1d_backward(const ConvGeom& g, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> db) {
  const size_t out_len = g.out_len();
  detail::check_conv(g, x.size(), w.size(), db.size(), dy.size());
  detail::expect_size(dw.size(), g.weight_count(), "conv1d weight grad");
  const size_t work = g.out_ch * out_len * g.in_ch * g.kernel;
  const long long n_out = static_cast<long long>(g.out_ch);
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (long long o = 0; o < n_out; ++o) {
    const size_t oo = static_cast<size_t>(o);
    const double* dyo = dy.data() + oo * out_len;
    double bacc = 0.0;
    for (size_t j = 0; j < out_len; ++j) bacc += dyo[j];
    db[oo] += bacc;
    for (size_t i = 0; i < g.in_ch; ++i) {
      const double* xi = x.data() + i * g.in_len;
      for (size_t t = 0; t < g.kernel; ++t) {
        double acc = 0.0;
        for (size_t j = 0; j < out_len; ++j) acc += dyo[j] * xi[j * g.stride + t];
        dw[(oo * g.in_ch + i) * g.kernel + t] += acc;
      }
    }
  }
  if (dx.empty()) return;
  detail::expect_size(dx.size(), g.in_ch * g.in_len, "conv1d input grad");
  const long long n_in = static_cast<long long>(g.in_ch);
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (long long i = 0; i < n_in; ++i) {
    const size_t ii = static_cast<size_t>(i);
    double* dxi = dx.data() + ii * g.in_len;
    std::fill(dxi, dxi + g.in_len, 0.0);
    for (size_t o = 0; o < g.out_ch; ++o) {
      const double* dyo = dy.data() + o * out_len;
      const double* wo = w.data() + (o * g.in_ch + ii) * g.kernel;
      for (size_t j = 0; j < out_len; ++j) {
        double* d = dxi + j * g.stride;
        for (size_t t = 0; t < g.kernel; ++t) d[t] += wo[t] * dyo[j];
      }
    }
  }
}

void maxpool_forward(const PoolGeom& g, std::span<const double> x, std::span<double> y,
                     std::span<uint32_t> argmax) {
  detail::check_pool(g, x.size(), y.size());
  detail::expect_size(argmax.size(), y.size(), "maxpool argmax");
  const size_t out_len = g.out_len();
  const long long n_ch = static_cast<long long>(g.channels);
#pragma omp parallel for schedule(static) if (g.channels * g.in_len > kParallelWork)
  for (long long c = 0; c < n_ch; ++c) {
    const size_t base = static_cast<size_t>(c) * g.in_len;
    for (size_t j = 0; j < out_len; ++j) {
      size_t best = base + j * g.stride;
      for (size_t t = 1; t < g.size; ++t) {
        const size_t k = base + j * g.stride + t;
        if (x[k] > x[best]) best = k;
      }
      y[static_cast<size_t>(c) * out_len + j] = x[best];
      argmax[static_cast<size_t>(c) * out_len + j] = static_cast<uint32_t>(best);
    }
  }
}

void maxpool_backward(const PoolGeom& g, std::span<const double> dy,
                      std::span<const uint32_t> argmax, std::span<double> dx) {
  detail::expect_size(dx.size(), g.channels * g.in_len, "maxpool input grad");
  detail::expect_size(dy.size(), g.channels * g.out_len(), "maxpool output grad");
  std::fill(dx.begin(), dx.end(), 0.0);
  // Scatter stays serial: overlapping windows may route to the same input.
  for (size_t k = 0; k < dy.size(); ++k) dx[argmax[k]] += dy[k];
}

void dense_forward(const DenseGeom& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y) {
  detail::check_dense(g, x.size(), w.size(), b.size(), y.size());
  const long long n_out = static_cast<long long>(g.out);
#pragma omp parallel for schedule(static) if (g.in * g.out > kParallelWork)
  for (long long o = 0; o < n_out; ++o) {
    const size_t oo = static_cast<size_t>(o);
    const double* wo = w.data() + oo * g.in;
    double acc = b[oo];
    for (size_t i = 0; i < g.in; ++i) acc += wo[i] * x[i];
    y[oo] = acc;
  }
}

void dense_backward(const DenseGeom& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                    std::span<double> db) {
  detail::check_dense(g, x.size(), w.size(), db.size(), dy.size());
  detail::expect_size(dw.size(), g.in * g.out, "dense weight grad");
  const bool par = g.in * g.out > kParallelWork;
  const long long n_out = static_cast<long long>(g.out);
#pragma omp parallel for schedule(static) if (par)
  for (long long o = 0; o < n_out; ++o) {
    const size_t oo = static_cast<size_t>(o);
    const double d = dy[oo];
    db[oo] += d;
    double* dwo = dw.data() + oo * g.in;
    for (size_t i = 0; i < g.in; ++i) dwo[i] += d * x[i];
  }
  if (dx.empty()) return;
  detail::expect_size(dx.size(), g.in, "dense input grad");
  // Blocks of inputs in parallel; within a block the sum runs over outputs in
  // ascending order, matching the serial kernel.
  const long long n_blocks = static_cast<long long>((g.in + kDenseBlock - 1) / kDenseBlock);
#pragma omp parallel for schedule(static) if (par)
  for (long long blk = 0; blk < n_blocks; ++blk) {
    const size_t lo = static_cast<size_t>(blk) * kDenseBlock;
    const size_t hi = std::min(g.in, lo + kDenseBlock);
    std::fill(dx.begin() + static_cast<std::ptrdiff_t>(lo),
              dx.begin() + static_cast<std::ptrdiff_t>(hi), 0.0);
    for (size_t o = 0; o < g.out; ++o) {
      const double d = dy[o];
      const double* wo = w.data() + o * g.in;
      for (size_t i = lo; i < hi; ++i) dx[i] += wo[i] * d;
    }
  }
}

void relu_inplace(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

void relu_backward(std::span<const double> activation, std::span<double> grad) {
  detail::expect_size(grad.size(), activation.size(), "relu grad");
  for (size_t i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > 0.0)) grad[i] = 0.0;
  }
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

BceResult bce_loss(double p, int y) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  if (y == 1) return {-std::log(q), -1.0 / q};
  return {-std::log(1.0 - q), 1.0 / (1.0 - q)};
}

double bce_mean(std::span<const double> p, std::span<const int> y) {
  detail::expect_size(y.size(), p.size(), "bce labels");
  if (p.empty()) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) s += bce_loss(p[i], y[i]).loss;
  return s / static_cast<double>(p.size());
}

Tensor1 conv1d_forward(const Tensor1& x, const std::vector<double>& w, size_t out_ch,
                       size_t kernel, const std::vector<double>& b, size_t stride) {
  const ConvGeom g{x.channels, out_ch, x.length, kernel, stride};
  Tensor1 y(out_ch, g.out_len());
  conv1d_forward(g, x.data, w, b, y.data);
  require_finite(y.data, "conv1d");
  return y;
}

std::pair<Tensor1, std::vector<uint32_t>> maxpool1d(const Tensor1& x, size_t size, size_t stride) {
  if (size < 1) throw ShapeError("maxpool size must be >= 1");
  const PoolGeom g{x.channels, x.length, size, stride};
  Tensor1 y(x.channels, g.out_len());
  std::vector<uint32_t> idx(y.data.size());
  maxpool_forward(g, x.data, y.data, idx);
  return {std::move(y), std::move(idx)};
}

std::vector<double> dense_forward(const std::vector<double>& x,
                                  const std::vector<std::vector<double>>& w,
                                  const std::vector<double>& b) {
  const DenseGeom g{x.size(), w.size()};
  std::vector<double> flat;
  flat.reserve(g.in * g.out);
  for (const auto& row : w) {
    detail::expect_size(row.size(), g.in, "dense weight row");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  std::vector<double> y(g.out);
  dense_forward(g, x, flat, b, y);
  require_finite(y, "dense");
  return y;
}

Tensor1 relu(const Tensor1& x) {
  Tensor1 y = x;
  relu_inplace(y.data);
  return y;
}

Tensor1 sigmoid(const Tensor1& x) {
  Tensor1 y = x;
  for (double& v : y.data) v = sigmoid(v);
  return y;
}

}  // namespace emllm::nn
