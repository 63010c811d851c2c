#ifndef DIETSNN_KERNELS_HPP
#define DIETSNN_KERNELS_HPP

#include <cstddef>

#include "dietsnn/tensor.hpp"

namespace dietsnn {

/// Geometry of a bias-free 2-D convolution.
struct ConvSpec {
  std::size_t kernel_w = 1;
  std::size_t kernel_h = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  /// Throws ShapeError if a size is zero or the output would be empty.
  void validate(std::size_t in_h, std::size_t in_w) const;
  std::size_t out_h(std::size_t in_h) const;
  std::size_t out_w(std::size_t in_w) const;
  Shape weight_shape() const { return {out_channels, in_channels, kernel_h, kernel_w}; }

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct ConvGrads {
  Tensor grad_input;
  Tensor grad_weights;
};

struct DenseGrads {
  Tensor grad_input;
  Tensor grad_weights;
};

// OpenMP-parallel kernels. Each output element is written by exactly one
// thread and every reduction runs in a fixed order, so results are
// bit-identical regardless of the thread count.
namespace kernels {

/// input [c_in, h, w], weights [c_out, c_in, k_h, k_w] -> [c_out, h_out, w_out]
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const ConvSpec& spec);
ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input,
                          const Tensor& weights, const ConvSpec& spec);
Tensor conv2d_backward_weights(const Tensor& grad_out, const Tensor& input, const ConvSpec& spec);
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& weights,
                             const Shape& input_shape, const ConvSpec& spec);

/// x [f_in] (any shape with f_in elements), weights [f_out, f_in] -> [f_out]
Tensor dense_forward(const Tensor& x, const Tensor& weights);
/// grad_input takes the shape of x.
DenseGrads dense_backward(const Tensor& grad_out, const Tensor& x, const Tensor& weights);
/// grad_out [f_out] -> W^T grad_out, shaped like `input_shape`.
Tensor dense_backward_input(const Tensor& grad_out, const Tensor& weights,
                            const Shape& input_shape);
/// Accumulates grad_out ⊗ x into grad_weights.
void dense_accumulate_weights(const Tensor& grad_out, const Tensor& x, Tensor& grad_weights);

/// Non-overlapping window of size k (stride k) over [c, h, w].
Tensor avg_pool2d_forward(const Tensor& input, std::size_t k);
Tensor avg_pool2d_backward(const Tensor& grad_out, const Shape& input_shape, std::size_t k);

Tensor relu_forward(const Tensor& x);
/// Passes the gradient where the pre-activation is strictly positive.
Tensor relu_backward(const Tensor& grad_out, const Tensor& pre_activation);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
void add_inplace(Tensor& acc, const Tensor& b);
void axpy_inplace(Tensor& acc, double alpha, const Tensor& b);
double reduce_sum(const Tensor& a);

}  // namespace kernels

// Serial textbook implementations. Kept as the correctness reference for the
// parallel kernels and as the baseline in the benchmark.
namespace reference {

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const ConvSpec& spec);
ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input,
                          const Tensor& weights, const ConvSpec& spec);
Tensor dense_forward(const Tensor& x, const Tensor& weights);
DenseGrads dense_backward(const Tensor& grad_out, const Tensor& x, const Tensor& weights);
Tensor avg_pool2d_forward(const Tensor& input, std::size_t k);

}  // namespace reference

}  // namespace dietsnn

#endif  // DIETSNN_KERNELS_HPP
