#include "dietsnn/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <utility>

namespace dietsnn {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("Tensor: shape " + shape_str(shape_) + " needs " +
                     std::to_string(shape_numel(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("Tensor::dim: axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(shape_));
  }
  return shape_[axis];
}

double& Tensor::at(std::size_t c, std::size_t y, std::size_t x) {
  return data_[(c * shape_[1] + y) * shape_[2] + x];
}

double Tensor::at(std::size_t c, std::size_t y, std::size_t x) const {
  return data_[(c * shape_[1] + y) * shape_[2] + x];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

void Tensor::reshape(Shape shape) {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("Tensor::reshape: cannot view " + shape_str(shape_) +
                     " as " + shape_str(shape));
  }
  shape_ = std::move(shape);
}

Tensor Tensor::slice(std::size_t index) const {
  if (shape_.empty() || index >= shape_[0]) {
    throw ShapeError("Tensor::slice: index " + std::to_string(index) +
                     " out of range for leading dim of " + shape_str(shape_));
  }
  Shape row_shape(shape_.begin() + 1, shape_.end());
  const std::size_t n = shape_numel(row_shape);
  std::vector<double> row(data_.begin() + static_cast<std::ptrdiff_t>(index * n),
                          data_.begin() + static_cast<std::ptrdiff_t>((index + 1) * n));
  return Tensor(std::move(row_shape), std::move(row));
}

void Tensor::set_slice(std::size_t index, const Tensor& row) {
  const std::size_t n = data_.size() / (shape_.empty() ? 1 : shape_[0]);
  if (shape_.empty() || index >= shape_[0] || row.size() != n) {
    throw ShapeError("Tensor::set_slice: row of " + shape_str(row.shape()) +
                     " does not fit " + shape_str(shape_));
  }
  std::copy(row.data_.begin(), row.data_.end(),
            data_.begin() + static_cast<std::ptrdiff_t>(index * n));
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace dietsnn
