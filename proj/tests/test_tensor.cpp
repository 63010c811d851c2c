#include <gtest/gtest.h>

#include <cmath>

#include "dietsnn/kernels.hpp"
#include "dietsnn/rng.hpp"
#include "scalar_autograd.hpp"

using namespace dietsnn;

namespace {

Tensor random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Written before the kernels: six nested loops straight from the definition.
Tensor naive_conv(const Tensor& x, const Tensor& w, const ConvSpec& c) {
  const std::size_t H = x.dim(1), W = x.dim(2);
  const std::size_t OH = (H + 2 * c.padding - c.kernel_h) / c.stride + 1;
  const std::size_t OW = (W + 2 * c.padding - c.kernel_w) / c.stride + 1;
  Tensor out({c.out_channels, OH, OW});
  for (std::size_t o = 0; o < c.out_channels; ++o)
    for (std::size_t y = 0; y < OH; ++y)
      for (std::size_t xx = 0; xx < OW; ++xx) {
        double s = 0.0;
        for (std::size_t i = 0; i < c.in_channels; ++i)
          for (std::size_t ky = 0; ky < c.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
              const long iy = long(y * c.stride + ky) - long(c.padding);
              const long ix = long(xx * c.stride + kx) - long(c.padding);
              if (iy < 0 || ix < 0 || iy >= long(H) || ix >= long(W)) continue;
              s += w[((o * c.in_channels + i) * c.kernel_h + ky) * c.kernel_w + kx] *
                   x[(i * H + std::size_t(iy)) * W + std::size_t(ix)];
            }
        out[(o * OH + y) * OW + xx] = s;
      }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<double> vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// Scalar reduction L = sum(out^2)/2 so dL/dout = out.
double half_sq(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += 0.5 * v * v;
  return s;
}

}  // namespace

TEST(TensorCore, ConstructionAndShapeErrors) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(shape_str(t.shape()), "[2x3]");
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(t.reshaped({4}), ShapeError);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
  Tensor u({2, 2}, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(u.slice(1)[0], 3.0);
}

TEST(Conv, IdentityKernel) {
  Rng rng(1);
  const ConvSpec c{1, 1, 1, 1, 1, 0};
  const Tensor x = random_tensor({1, 5, 5}, rng);
  EXPECT_TRUE(kernels::conv2d_forward(x, Tensor({1, 1, 1, 1}, 1.0), c) == x);
}

TEST(Conv, ZeroInputGivesZero) {
  Rng rng(2);
  const ConvSpec c{3, 3, 2, 4, 1, 1};
  const Tensor y = kernels::conv2d_forward(Tensor({2, 5, 5}), random_tensor(c.weight_shape(), rng), c);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Conv, MatchesNaiveLoops) {
  Rng rng(3);
  const ConvSpec fixed{3, 3, 2, 4, 1, 0};
  const Tensor x = random_tensor({2, 5, 5}, rng), w = random_tensor(fixed.weight_shape(), rng);
  EXPECT_LT(max_abs_diff(kernels::conv2d_forward(x, w, fixed), naive_conv(x, w, fixed)), 1e-12);

  for (int trial = 0; trial < 30; ++trial) {
    ConvSpec c;
    c.kernel_h = c.kernel_w = 1 + rng.below(3);
    c.in_channels = 1 + rng.below(3);
    c.out_channels = 1 + rng.below(4);
    c.stride = 1 + rng.below(2);
    c.padding = rng.below(2);
    const std::size_t side = c.kernel_h + rng.below(5);
    const Tensor xi = random_tensor({c.in_channels, side, side}, rng);
    const Tensor wi = random_tensor(c.weight_shape(), rng);
    const Tensor want = naive_conv(xi, wi, c);
    EXPECT_LT(max_abs_diff(kernels::conv2d_forward(xi, wi, c), want), 1e-12);
    EXPECT_LT(max_abs_diff(reference::conv2d_forward(xi, wi, c), want), 1e-12);
  }
}

TEST(Conv, ShapeMismatchNamesDimension) {
  const ConvSpec c{3, 3, 2, 4, 1, 0};
  try {
    kernels::conv2d_forward(Tensor({3, 5, 5}), Tensor(c.weight_shape()), c);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
}

TEST(Conv, BackwardZeroAndDelta) {
  Rng rng(4);
  const ConvSpec c{3, 3, 2, 2, 1, 0};
  const Tensor x = random_tensor({2, 5, 5}, rng), w = random_tensor(c.weight_shape(), rng);
  const auto zero = kernels::conv2d_backward(Tensor({2, 3, 3}), x, w, c);
  for (double v : zero.grad_input.values()) EXPECT_EQ(v, 0.0);
  for (double v : zero.grad_weights.values()) EXPECT_EQ(v, 0.0);

  Tensor delta({2, 3, 3});
  delta[(1 * 3 + 1) * 3 + 2] = 1.0;  // channel 1, y=1, x=2
  const auto g = kernels::conv2d_backward(delta, x, w, c);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        EXPECT_EQ(g.grad_weights[((1 * 2 + i) * 3 + ky) * 3 + kx], x[(i * 5 + 1 + ky) * 5 + 2 + kx]);
        EXPECT_EQ(g.grad_weights[((0 * 2 + i) * 3 + ky) * 3 + kx], 0.0);
      }
}

TEST(Conv, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  for (const ConvSpec c : {ConvSpec{3, 3, 2, 3, 1, 1}, ConvSpec{2, 2, 1, 2, 2, 0}, ConvSpec{3, 3, 2, 2, 2, 1}}) {
    const Tensor x = random_tensor({c.in_channels, 6, 6}, rng);
    const Tensor w = random_tensor(c.weight_shape(), rng);
    const Tensor y = kernels::conv2d_forward(x, w, c);
    const auto g = kernels::conv2d_backward(y, x, w, c);
    const auto fx = [&](const std::vector<double>& v) {
      return half_sq(kernels::conv2d_forward(Tensor(x.shape(), v), w, c));
    };
    const auto fw = [&](const std::vector<double>& v) {
      return half_sq(kernels::conv2d_forward(x, Tensor(w.shape(), v), c));
    };
    EXPECT_LT(oracle::rel_err(vec(g.grad_input), oracle::numeric_gradient(fx, vec(x))), 1e-6);
    EXPECT_LT(oracle::rel_err(vec(g.grad_weights), oracle::numeric_gradient(fw, vec(w))), 1e-6);
    const auto r = reference::conv2d_backward(y, x, w, c);
    EXPECT_LT(max_abs_diff(r.grad_input, g.grad_input), 1e-12);
    EXPECT_LT(max_abs_diff(r.grad_weights, g.grad_weights), 1e-12);
  }
}

TEST(Dense, IdentityAndFiniteDifferences) {
  Rng rng(6);
  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
  const Tensor x = random_tensor({4}, rng);
  EXPECT_TRUE(kernels::dense_forward(x, eye) == x);

  const Tensor xi = random_tensor({2, 3, 3}, rng), w = random_tensor({5, 18}, rng);
  const Tensor y = kernels::dense_forward(xi, w);
  EXPECT_EQ(y.shape(), Shape{5});
  const auto g = kernels::dense_backward(y, xi, w);
  EXPECT_EQ(g.grad_input.shape(), xi.shape());
  const auto fx = [&](const std::vector<double>& v) {
    return half_sq(kernels::dense_forward(Tensor(xi.shape(), v), w));
  };
  const auto fw = [&](const std::vector<double>& v) {
    return half_sq(kernels::dense_forward(xi, Tensor(w.shape(), v)));
  };
  EXPECT_LT(oracle::rel_err(vec(g.grad_input), oracle::numeric_gradient(fx, vec(xi))), 1e-6);
  EXPECT_LT(oracle::rel_err(vec(g.grad_weights), oracle::numeric_gradient(fw, vec(w))), 1e-6);
  const auto r = reference::dense_backward(y, xi, w);
  EXPECT_LT(max_abs_diff(r.grad_weights, g.grad_weights), 1e-12);
  EXPECT_THROW(kernels::dense_forward(Tensor({3}), w), ShapeError);
}

TEST(Pool, MeanAndGradientMass) {
  const Tensor x({1, 2, 2}, {1, 3, 5, 7});
  EXPECT_EQ(kernels::avg_pool2d_forward(x, 2)[0], 4.0);
  Rng rng(7);
  const Tensor xi = random_tensor({3, 6, 6}, rng);
  const Tensor y = kernels::avg_pool2d_forward(xi, 2);
  EXPECT_LT(max_abs_diff(y, reference::avg_pool2d_forward(xi, 2)), 1e-15);
  const Tensor g = kernels::avg_pool2d_backward(y, xi.shape(), 2);
  EXPECT_NEAR(kernels::reduce_sum(g), kernels::reduce_sum(y), 1e-12);
  const auto f = [&](const std::vector<double>& v) {
    return half_sq(kernels::avg_pool2d_forward(Tensor(xi.shape(), v), 2));
  };
  EXPECT_LT(oracle::rel_err(vec(g), oracle::numeric_gradient(f, vec(xi))), 1e-6);
  // Trailing rows/columns that do not fill a window are dropped.
  const Tensor odd({1, 3, 2}, {1, 3, 5, 7, 100, 100});
  const Tensor po = kernels::avg_pool2d_forward(odd, 2);
  EXPECT_EQ(po.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(po[0], 4.0);
  EXPECT_THROW(kernels::avg_pool2d_forward(Tensor({1, 1, 4}), 2), ShapeError);
}

TEST(Relu, BackwardMasksAndFiniteDifferences) {
  Rng rng(8);
  Tensor x = random_tensor({20}, rng);
  for (double& v : x.values()) {
    if (std::abs(v) < 1e-3) v = 0.5;  // keep FD away from the kink
  }
  const Tensor y = kernels::relu_forward(x);
  const Tensor g = kernels::relu_backward(y, x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(g[i], x[i] > 0 ? y[i] : 0.0);
  const auto f = [&](const std::vector<double>& v) {
    return half_sq(kernels::relu_forward(Tensor(x.shape(), v)));
  };
  EXPECT_LT(oracle::rel_err(vec(g), oracle::numeric_gradient(f, vec(x))), 1e-6);
}

TEST(Elementwise, Arithmetic) {
  const Tensor a({3}, {1, 2, 3}), b({3}, {4, 5, 6});
  EXPECT_TRUE(kernels::add(a, b) == Tensor({3}, {5, 7, 9}));
  EXPECT_TRUE(kernels::mul(a, b) == Tensor({3}, {4, 10, 18}));
  EXPECT_TRUE(kernels::scale(a, 2.0) == Tensor({3}, {2, 4, 6}));
  Tensor acc = a;
  kernels::axpy_inplace(acc, 0.5, b);
  EXPECT_TRUE(acc == Tensor({3}, {3, 4.5, 6}));
  EXPECT_EQ(kernels::reduce_sum(b), 15.0);
  EXPECT_THROW(kernels::add(a, Tensor({2})), ShapeError);
}

TEST(Elementwise, FiniteInFiniteOut) {
  Rng rng(9);
  const ConvSpec c{3, 3, 2, 3, 1, 1};
  const Tensor x = random_tensor({2, 8, 8}, rng, -1e3, 1e3);
  const Tensor y = kernels::conv2d_forward(x, random_tensor(c.weight_shape(), rng), c);
  EXPECT_TRUE(y.all_finite());
  EXPECT_TRUE(kernels::avg_pool2d_forward(y, 2).all_finite());
}
