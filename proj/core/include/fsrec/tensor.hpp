#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsrec::nn {

// Dense row-major value block. Rank 2 {batch, features} feeds dense layers,
// rank 3 {batch, channels, length} feeds conv1d.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> v)
      : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != element_count(shape)) {
      throw std::invalid_argument("tensor value count does not match shape");
    }
  }

  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

  static Tensor zeros(std::vector<std::size_t> shape) {
    std::size_t n = element_count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }

  std::size_t size() const { return values.size(); }
  std::size_t batch() const { return shape.empty() ? 0 : shape[0]; }
  // Elements per sample.
  std::size_t sample_size() const { return batch() == 0 ? 0 : size() / batch(); }

  bool all_finite() const {
    for (double v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

}  // namespace fsrec::nn
