#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hetplan/core/error.hpp"
#include "hetplan/core/rng.hpp"

namespace hetplan::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major tensor value.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel(shape)) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
  }
  explicit Tensor(Shape s) : shape(std::move(s)), data(numel(shape), 0.0) {}

  std::size_t size() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

/// Learnable parameter: values and accumulated gradient share one shape.
struct ParamTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;

  ParamTensor() = default;
  ParamTensor(std::string n, Shape s)
      : name(std::move(n)), shape(std::move(s)), values(numel(shape), 0.0), grad(numel(shape), 0.0) {}

  std::size_t size() const { return values.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

  bool finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    for (double g : grad)
      if (!std::isfinite(g)) return false;
    return true;
  }

  /// Glorot-uniform fill with the given fan sizes.
  void init_glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : values) v = rng.uniform(-limit, limit);
  }
};

}  // namespace hetplan::nn
