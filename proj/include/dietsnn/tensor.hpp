#ifndef DIETSNN_TENSOR_HPP
#define DIETSNN_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dietsnn {

using Shape = std::vector<std::size_t>;

/// Raised when operands disagree on a dimension. The message names the
/// operation and the offending dimension.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t c, std::size_t y, std::size_t x);
  double at(std::size_t c, std::size_t y, std::size_t x) const;

  void fill(double value);
  /// Same data viewed with a different shape of equal element count.
  Tensor reshaped(Shape shape) const;
  void reshape(Shape shape);

  /// Slice along the leading axis: row `index` of a [n, ...] tensor.
  Tensor slice(std::size_t index) const;
  void set_slice(std::size_t index, const Tensor& row);

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Throws ShapeError when the two shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace dietsnn

#endif  // DIETSNN_TENSOR_HPP
