#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace chor {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Storage is shared between copies and treated as immutable; the only way to
/// write is mutable_data(), which detaches the storage first when it is shared.
/// That makes copying a Tensor O(1) and lets concurrent readers share one
/// model's parameters.
class Tensor {
 public:
  /// Rank-0 tensor holding 0.0.
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_->size(); }

  std::span<const double> data() const { return {data_->data(), data_->size()}; }
  std::span<double> mutable_data();

  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t row, std::size_t col) const;
  /// Value of a single-element tensor.
  double item() const;

  bool all_finite() const;
  /// Same storage viewed under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  std::vector<double> to_vector() const { return *data_; }

  /// Exact elementwise equality, including shape.
  bool operator==(const Tensor& other) const;

 private:
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
};

/// Largest absolute elementwise difference; throws ShapeError on mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace chor
