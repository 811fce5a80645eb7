#include <algorithm>

#include "emllm/kernels.hpp"
#include "kernel_checks.hpp"

namespace emllm::nn::reference {

void conv1d_forward(const ConvGeom& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  detail::check_conv(g, x.size(), w.size(), b.size(), y.size());
  const size_t out_len = g.out_len();
  for (size_t o = 0; o < g.out_ch; ++o) {
    for (size_t j = 0; j < out_len; ++j) {
      double acc = b[o];
      for (size_t i = 0; i < g.in_ch; ++i) {
        for (size_t t = 0; t < g.kernel; ++t) {
          acc += w[(o * g.in_ch + i) * g.kernel + t] * x[i * g.in_len + j * g.stride + t];
        }
      }
      y[o * out_len + j] = acc;
    }
  }
}

void conv1d_backward(const ConvGeom& g, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> db) {
  const size_t out_len = g.out_len();
  detail::check_conv(g, x.size(), w.size(), db.size(), dy.size());
  detail::expect_size(dw.size(), g.weight_count(), "conv1d weight grad");
  for (size_t o = 0; o < g.out_ch; ++o) {
    const double* dyo = dy.data() + o * out_len;
    double bacc = 0.0;
    for (size_t j = 0; j < out_len; ++j) bacc += dyo[j];
    db[o] += bacc;
    for (size_t i = 0; i < g.in_ch; ++i) {
      const double* xi = x.data() + i * g.in_len;
      for (size_t t = 0; t < g.kernel; ++t) {
        double acc = 0.0;
        for (size_t j = 0; j < out_len; ++j) acc += dyo[j] * xi[j * g.stride + t];
        dw[(o * g.in_ch + i) * g.kernel + t] += acc;
      }
    }
  }
  if (dx.empty()) return;
  detail::expect_size(dx.size(), g.in_ch * g.in_len, "conv1d input grad");
  for (size_t i = 0; i < g.in_ch; ++i) {
    double* dxi = dx.data() + i * g.in_len;
    std::fill(dxi, dxi + g.in_len, 0.0);
    for (size_t o = 0; o < g.out_ch; ++o) {
      const double* dyo = dy.data() + o * out_len;
      const double* wo = w.data() + (o * g.in_ch + i) * g.kernel;
      for (size_t j = 0; j < out_len; ++j) {
        for (size_t t = 0; t < g.kernel; ++t) dxi[j * g.stride + t] += wo[t] * dyo[j];
      }
    }
  }
}

void maxpool_forward(const PoolGeom& g, std::span<const double> x, std::span<double> y,
                     std::span<uint32_t> argmax) {
  detail::check_pool(g, x.size(), y.size());
  detail::expect_size(argmax.size(), y.size(), "maxpool argmax");
  const size_t out_len = g.out_len();
  for (size_t c = 0; c < g.channels; ++c) {
    for (size_t j = 0; j < out_len; ++j) {
      size_t best = c * g.in_len + j * g.stride;
      for (size_t t = 1; t < g.size; ++t) {
        const size_t k = c * g.in_len + j * g.stride + t;
        if (x[k] > x[best]) best = k;
      }
      y[c * out_len + j] = x[best];
      argmax[c * out_len + j] = static_cast<uint32_t>(best);
    }
  }
}

void maxpool_backward(const PoolGeom& g, std::span<const double> dy,
                      std::span<const uint32_t> argmax, std::span<double> dx) {
  detail::expect_size(dx.size(), g.channels * g.in_len, "maxpool input grad");
  detail::expect_size(dy.size(), g.channels * g.out_len(), "maxpool output grad");
  std::fill(dx.begin(), dx.end(), 0.0);
  for (size_t k = 0; k < dy.size(); ++k) dx[argmax[k]] += dy[k];
}

void dense_forward(const DenseGeom& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y) {
  detail::check_dense(g, x.size(), w.size(), b.size(), y.size());
  for (size_t o = 0; o < g.out; ++o) {
    double acc = b[o];
    for (size_t i = 0; i < g.in; ++i) acc += w[o * g.in + i] * x[i];
    y[o] = acc;
  }
}

void dense_backward(const DenseGeom& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                    std::span<double> db) {
  detail::check_dense(g, x.size(), w.size(), db.size(), dy.size());
  detail::expect_size(dw.size(), g.in * g.out, "dense weight grad");
  for (size_t o = 0; o < g.out; ++o) {
    db[o] += dy[o];
    for (size_t i = 0; i < g.in; ++i) dw[o * g.in + i] += dy[o] * x[i];
  }
  if (dx.empty()) return;
  detail::expect_size(dx.size(), g.in, "dense input grad");
  std::fill(dx.begin(), dx.end(), 0.0);
  for (size_t o = 0; o < g.out; ++o) {
    for (size_t i = 0; i < g.in; ++i) dx[i] += w[o * g.in + i] * dy[o];
  }
}

}  // namespace emllm::nn::reference
