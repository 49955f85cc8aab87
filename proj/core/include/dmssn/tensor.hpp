#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dmssn {

/// Dense row-major array of doubles with an arbitrary shape.
///
/// Rank-3 tensors are feature maps laid out height x width x channels
/// (channels fastest), so a pixel's spectrum is contiguous.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor map(int height, int width, int channels, double fill = 0.0) {
    return Tensor({height, width, channels}, fill);
  }
  static Tensor scalar(double v) { return Tensor({1}, v); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  // Feature-map accessors; only meaningful for rank-3 tensors.
  int height() const { return shape_[0]; }
  int width() const { return shape_[1]; }
  int channels() const { return shape_[2]; }
  std::size_t pixels() const { return static_cast<std::size_t>(shape_[0]) * shape_[1]; }

  double& at(int y, int x, int c) {
    return values_[(static_cast<std::size_t>(y) * shape_[1] + x) * shape_[2] + c];
  }
  const double& at(int y, int x, int c) const {
    return values_[(static_cast<std::size_t>(y) * shape_[1] + x) * shape_[2] + c];
  }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double item() const { return values_.at(0); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }
  const std::vector<double>& storage() const { return values_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  void fill(double v);
  Tensor reshaped(std::vector<int> shape) const;

  bool all_finite() const;
  double sum() const;
  double max_abs() const;

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

std::size_t element_count(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

/// Throws ShapeError unless `t` is a rank-3 feature map.
void require_map(const Tensor& t, const char* what);
/// Throws ShapeError unless shapes are identical.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace dmssn
