#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace emllm {

// (channels x length) row-major block of doubles.
struct Tensor1 {
  size_t channels{0};
  size_t length{0};
  std::vector<double> data;

  Tensor1() = default;
  Tensor1(size_t c, size_t l) : channels(c), length(l), data(c * l, 0.0) {}
  Tensor1(size_t c, size_t l, std::vector<double> values);

  double& at(size_t c, size_t i) { return data[c * length + i]; }
  double at(size_t c, size_t i) const { return data[c * length + i]; }
  std::span<const double> row(size_t c) const { return {data.data() + c * length, length}; }
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_finite(std::span<const double> values, const std::string& what);

}  // namespace emllm
