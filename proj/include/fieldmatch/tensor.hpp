#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fieldmatch {

// Dense row-major tensor of doubles. Rank is 1 or 2 everywhere in this
// codebase; scalars are shape {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    values_.assign(static_cast<std::size_t>(element_count(shape_)), 0.0);
  }
  Tensor(std::vector<int> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (static_cast<std::int64_t>(values_.size()) != element_count(shape_)) {
      throw std::invalid_argument("Tensor: value count does not match shape");
    }
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int size() const { return static_cast<int>(values_.size()); }
  int rows() const { return shape_.empty() ? 0 : shape_[0]; }
  int cols() const { return rank() == 2 ? shape_[1] : 1; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& at(int i) { return values_[static_cast<std::size_t>(i)]; }
  double at(int i) const { return values_[static_cast<std::size_t>(i)]; }
  double& at(int r, int c) { return values_[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return values_[static_cast<std::size_t>(r) * cols() + c]; }

  double item() const {
    if (size() != 1) throw std::logic_error("Tensor::item: not a scalar");
    return values_[0];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill(double v) { values_.assign(values_.size(), v); }

  static std::int64_t element_count(const std::vector<int>& shape) {
    if (shape.empty()) throw std::invalid_argument("Tensor: empty shape");
    std::int64_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
      n *= d;
    }
    return n;
  }

  static std::string shape_string(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i > 0) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

}  // namespace fieldmatch
