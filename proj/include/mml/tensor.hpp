#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace mml {

/// Error type for all structured failures (shape mismatches, bad configs,
/// corrupt files). Carries a human-readable message only.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense n-dimensional array of 64-bit reals, row-major.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0);

  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> values);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t extent(std::size_t axis) const { return shape.at(axis); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  double& at(std::initializer_list<std::size_t> idx);
  double at(std::initializer_list<std::size_t> idx) const;
  std::size_t flat_index(std::initializer_list<std::size_t> idx) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  void fill(double v);
};

std::string shape_str(const std::vector<std::size_t>& shape);
std::size_t shape_size(const std::vector<std::size_t>& shape);

}  // namespace mml
