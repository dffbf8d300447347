#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sharpseg/error.hpp"

namespace sharpseg {

/// Extents of a dense row-major array. An empty shape denotes a scalar.
using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

/// Dense float64 array with an optional same-shape gradient buffer.
///
/// Tensors are plain values. They only take part in differentiation once a
/// Graph registers them: Graph::parameter() binds a tensor whose gradient
/// buffer receives accumulated gradients during backward, Graph::constant()
/// copies the value in as a detached input that never receives gradient.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Value of a single-element tensor; NotScalar otherwise.
  double item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  /// Turning gradients on allocates a zeroed buffer; off releases it.
  void set_requires_grad(bool on);
  std::span<double> grad() noexcept { return grad_; }
  std::span<const double> grad() const noexcept { return grad_; }
  void zero_grad() noexcept;

  /// Same data under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor& a, const Tensor& b) noexcept {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

}  // namespace sharpseg
