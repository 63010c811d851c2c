#include "dietsnn/kernels.hpp"

#include <omp.h>

#include <cstdint>
#include <string>

namespace dietsnn {

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = 1 << 15;

std::string dim_msg(const char* op, const char* what, std::size_t want, std::size_t got) {
  return std::string(op) + ": " + what + " expected " + std::to_string(want) +
         ", got " + std::to_string(got);
}

void check_conv_operands(const char* op, const Tensor& input, const Tensor& weights,
                         const ConvSpec& spec) {
  if (input.rank() != 3) {
    throw ShapeError(std::string(op) + ": input must be [c_in,h,w], got " +
                     shape_str(input.shape()));
  }
  if (input.dim(0) != spec.in_channels) {
    throw ShapeError(dim_msg(op, "input channels (dim 0)", spec.in_channels, input.dim(0)));
  }
  spec.validate(input.dim(1), input.dim(2));
  const Shape ws = spec.weight_shape();
  if (weights.shape() != ws) {
    const char* names[] = {"weight out_channels (dim 0)", "weight in_channels (dim 1)",
                           "weight kernel_h (dim 2)", "weight kernel_w (dim 3)"};
    if (weights.rank() != 4) {
      throw ShapeError(std::string(op) + ": weights must be rank 4, got " +
                       shape_str(weights.shape()));
    }
    for (std::size_t i = 0; i < 4; ++i) {
      if (weights.dim(i) != ws[i]) throw ShapeError(dim_msg(op, names[i], ws[i], weights.dim(i)));
    }
  }
}

void check_dense_operands(const char* op, const Tensor& x, const Tensor& weights) {
  if (weights.rank() != 2) {
    throw ShapeError(std::string(op) + ": weights must be [f_out,f_in], got " +
                     shape_str(weights.shape()));
  }
  if (x.size() != weights.dim(1)) {
    throw ShapeError(dim_msg(op, "input features f_in (weight dim 1)", weights.dim(1), x.size()));
  }
}

void check_pool(const char* op, const Shape& in, std::size_t k) {
  if (in.size() != 3) {
    throw ShapeError(std::string(op) + ": input must be [c,h,w], got " + shape_str(in));
  }
  if (k == 0 || in[1] < k || in[2] < k) {
    throw ShapeError(std::string(op) + ": window " + std::to_string(k) +
                     " does not fit spatial dims " + shape_str(in));
  }
}

}  // namespace

void ConvSpec::validate(std::size_t in_h, std::size_t in_w) const {
  if (kernel_w == 0 || kernel_h == 0 || in_channels == 0 || out_channels == 0 || stride == 0) {
    throw ShapeError("ConvSpec: kernel sizes, channels and stride must be >= 1");
  }
  if (in_h + 2 * padding < kernel_h) {
    throw ShapeError("ConvSpec: kernel_h " + std::to_string(kernel_h) +
                     " exceeds padded input height " + std::to_string(in_h + 2 * padding));
  }
  if (in_w + 2 * padding < kernel_w) {
    throw ShapeError("ConvSpec: kernel_w " + std::to_string(kernel_w) +
                     " exceeds padded input width " + std::to_string(in_w + 2 * padding));
  }
}

std::size_t ConvSpec::out_h(std::size_t in_h) const {
  return (in_h + 2 * padding - kernel_h) / stride + 1;
}

std::size_t ConvSpec::out_w(std::size_t in_w) const {
  return (in_w + 2 * padding - kernel_w) / stride + 1;
}

namespace kernels {

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const ConvSpec& spec) {
  check_conv_operands("conv2d_forward", input, weights, spec);
  const auto ci_n = static_cast<std::int64_t>(spec.in_channels);
  const auto co_n = static_cast<std::int64_t>(spec.out_channels);
  const auto h = static_cast<std::int64_t>(input.dim(1));
  const auto w = static_cast<std::int64_t>(input.dim(2));
  const auto kh = static_cast<std::int64_t>(spec.kernel_h);
  const auto kw = static_cast<std::int64_t>(spec.kernel_w);
  const auto stride = static_cast<std::int64_t>(spec.stride);
  const auto pad = static_cast<std::int64_t>(spec.padding);
  const auto oh = static_cast<std::int64_t>(spec.out_h(input.dim(1)));
  const auto ow = static_cast<std::int64_t>(spec.out_w(input.dim(2)));

  Tensor out({spec.out_channels, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  const double* in = input.data();
  const double* wt = weights.data();
  double* o = out.data();
  const std::size_t work = static_cast<std::size_t>(co_n * oh * ow * ci_n * kh * kw);

#pragma omp parallel for collapse(2) schedule(static) if (work > kParallelWork)
  for (std::int64_t co = 0; co < co_n; ++co) {
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::int64_t ci = 0; ci < ci_n; ++ci) {
          const double* wk = wt + ((co * ci_n + ci) * kh) * kw;
          const double* plane = in + ci * h * w;
          for (std::int64_t ky = 0; ky < kh; ++ky) {
            const std::int64_t iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (std::int64_t kx = 0; kx < kw; ++kx) {
              const std::int64_t ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= w) continue;
              acc += plane[iy * w + ix] * wk[ky * kw + kx];
            }
          }
        }
        o[(co * oh + oy) * ow + ox] = acc;
      }
    }
  }
  return out;
}

namespace {

struct ConvDims {
  std::int64_t ci_n, co_n, h, w, kh, kw, stride, pad, oh, ow;
};

ConvDims conv_dims(const Shape& in, const ConvSpec& spec) {
  return {static_cast<std::int64_t>(spec.in_channels), static_cast<std::int64_t>(spec.out_channels),
          static_cast<std::int64_t>(in[1]),            static_cast<std::int64_t>(in[2]),
          static_cast<std::int64_t>(spec.kernel_h),    static_cast<std::int64_t>(spec.kernel_w),
          static_cast<std::int64_t>(spec.stride),      static_cast<std::int64_t>(spec.padding),
          static_cast<std::int64_t>(spec.out_h(in[1])), static_cast<std::int64_t>(spec.out_w(in[2]))};
}

void check_grad_out(const char* op, const Tensor& grad_out, const Shape& in, const ConvSpec& spec) {
  if (in.size() != 3 || in[0] != spec.in_channels) {
    throw ShapeError(std::string(op) + ": input shape " + shape_str(in) +
                     " does not match in_channels " + std::to_string(spec.in_channels));
  }
  spec.validate(in[1], in[2]);
  const Shape expect_out = {spec.out_channels, spec.out_h(in[1]), spec.out_w(in[2])};
  if (grad_out.shape() != expect_out) {
    throw ShapeError(std::string(op) + ": grad_out expected " + shape_str(expect_out) + ", got " +
                     shape_str(grad_out.shape()));
  }
}

std::size_t conv_work(const ConvDims& d) {
  return static_cast<std::size_t>(d.co_n * d.oh * d.ow * d.ci_n * d.kh * d.kw);
}

}  // namespace

Tensor conv2d_backward_weights(const Tensor& grad_out, const Tensor& input, const ConvSpec& spec) {
  check_grad_out("conv2d_backward_weights", grad_out, input.shape(), spec);
  const ConvDims d = conv_dims(input.shape(), spec);
  Tensor grad_w(spec.weight_shape());
  const double* go = grad_out.data();
  const double* in = input.data();
  double* gw = grad_w.data();

  // One (co, ci) kernel slice per iteration.
#pragma omp parallel for collapse(2) schedule(static) if (conv_work(d) > kParallelWork)
  for (std::int64_t co = 0; co < d.co_n; ++co) {
    for (std::int64_t ci = 0; ci < d.ci_n; ++ci) {
      const double* plane = in + ci * d.h * d.w;
      const double* gplane = go + co * d.oh * d.ow;
      for (std::int64_t ky = 0; ky < d.kh; ++ky) {
        for (std::int64_t kx = 0; kx < d.kw; ++kx) {
          double acc = 0.0;
          for (std::int64_t oy = 0; oy < d.oh; ++oy) {
            const std::int64_t iy = oy * d.stride + ky - d.pad;
            if (iy < 0 || iy >= d.h) continue;
            for (std::int64_t ox = 0; ox < d.ow; ++ox) {
              const std::int64_t ix = ox * d.stride + kx - d.pad;
              if (ix < 0 || ix >= d.w) continue;
              acc += gplane[oy * d.ow + ox] * plane[iy * d.w + ix];
            }
          }
          gw[((co * d.ci_n + ci) * d.kh + ky) * d.kw + kx] = acc;
        }
      }
    }
  }
  return grad_w;
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& weights,
                             const Shape& input_shape, const ConvSpec& spec) {
  check_grad_out("conv2d_backward_input", grad_out, input_shape, spec);
  if (weights.shape() != spec.weight_shape()) {
    throw ShapeError("conv2d_backward_input: weights expected " + shape_str(spec.weight_shape()) +
                     ", got " + shape_str(weights.shape()));
  }
  const ConvDims d = conv_dims(input_shape, spec);
  Tensor grad_in(input_shape);
  const double* go = grad_out.data();
  const double* wt = weights.data();
  double* gi = grad_in.data();

  // Gather: each input pixel collects from the outputs whose receptive field
  // covers it.
#pragma omp parallel for collapse(2) schedule(static) if (conv_work(d) > kParallelWork)
  for (std::int64_t ci = 0; ci < d.ci_n; ++ci) {
    for (std::int64_t iy = 0; iy < d.h; ++iy) {
      for (std::int64_t ix = 0; ix < d.w; ++ix) {
        double acc = 0.0;
        for (std::int64_t co = 0; co < d.co_n; ++co) {
          const double* wk = wt + ((co * d.ci_n + ci) * d.kh) * d.kw;
          const double* gplane = go + co * d.oh * d.ow;
          for (std::int64_t ky = 0; ky < d.kh; ++ky) {
            const std::int64_t ny = iy + d.pad - ky;
            if (ny < 0 || ny % d.stride != 0) continue;
            const std::int64_t oy = ny / d.stride;
            if (oy >= d.oh) continue;
            for (std::int64_t kx = 0; kx < d.kw; ++kx) {
              const std::int64_t nx = ix + d.pad - kx;
              if (nx < 0 || nx % d.stride != 0) continue;
              const std::int64_t ox = nx / d.stride;
              if (ox >= d.ow) continue;
              acc += gplane[oy * d.ow + ox] * wk[ky * d.kw + kx];
            }
          }
        }
        gi[(ci * d.h + iy) * d.w + ix] = acc;
      }
    }
  }
  return grad_in;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights,
                          const ConvSpec& spec) {
  check_conv_operands("conv2d_backward", input, weights, spec);
  return {conv2d_backward_input(grad_out, weights, input.shape(), spec),
          conv2d_backward_weights(grad_out, input, spec)};
}

Tensor dense_forward(const Tensor& x, const Tensor& weights) {
  check_dense_operands("dense_forward", x, weights);
  const auto f_out = static_cast<std::int64_t>(weights.dim(0));
  const auto f_in = static_cast<std::int64_t>(weights.dim(1));
  Tensor y({weights.dim(0)});
  const double* xv = x.data();
  const double* wv = weights.data();
  double* yv = y.data();
#pragma omp parallel for schedule(static) if (static_cast<std::size_t>(f_out * f_in) > kParallelWork)
  for (std::int64_t o = 0; o < f_out; ++o) {
    const double* row = wv + o * f_in;
    double acc = 0.0;
    for (std::int64_t i = 0; i < f_in; ++i) acc += row[i] * xv[i];
    yv[o] = acc;
  }
  return y;
}

Tensor dense_backward_input(const Tensor& grad_out, const Tensor& weights,
                            const Shape& input_shape) {
  if (weights.rank() != 2 || grad_out.size() != weights.dim(0)) {
    throw ShapeError("dense_backward_input: grad_out of " + shape_str(grad_out.shape()) +
                     " does not match weights " + shape_str(weights.shape()));
  }
  if (shape_numel(input_shape) != weights.dim(1)) {
    throw ShapeError(dim_msg("dense_backward_input", "input features f_in", weights.dim(1),
                             shape_numel(input_shape)));
  }
  const auto f_out = static_cast<std::int64_t>(weights.dim(0));
  const auto f_in = static_cast<std::int64_t>(weights.dim(1));
  Tensor gx(input_shape);
  const double* g = grad_out.data();
  const double* wv = weights.data();
  double* out = gx.data();
#pragma omp parallel for schedule(static) if (static_cast<std::size_t>(f_out * f_in) > kParallelWork)
  for (std::int64_t i = 0; i < f_in; ++i) {
    double acc = 0.0;
    for (std::int64_t o = 0; o < f_out; ++o) acc += g[o] * wv[o * f_in + i];
    out[i] = acc;
  }
  return gx;
}

void dense_accumulate_weights(const Tensor& grad_out, const Tensor& x, Tensor& grad_weights) {
  check_dense_operands("dense_accumulate_weights", x, grad_weights);
  if (grad_out.size() != grad_weights.dim(0)) {
    throw ShapeError(dim_msg("dense_accumulate_weights", "output features f_out (weight dim 0)",
                             grad_weights.dim(0), grad_out.size()));
  }
  const auto f_out = static_cast<std::int64_t>(grad_weights.dim(0));
  const auto f_in = static_cast<std::int64_t>(grad_weights.dim(1));
  const double* g = grad_out.data();
  const double* xv = x.data();
  double* gw = grad_weights.data();
#pragma omp parallel for schedule(static) if (static_cast<std::size_t>(f_out * f_in) > kParallelWork)
  for (std::int64_t o = 0; o < f_out; ++o) {
    const double go = g[o];
    if (go == 0.0) continue;
    double* row = gw + o * f_in;
    for (std::int64_t i = 0; i < f_in; ++i) row[i] += go * xv[i];
  }
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& x, const Tensor& weights) {
  check_dense_operands("dense_backward", x, weights);
  DenseGrads g{dense_backward_input(grad_out, weights, x.shape()), Tensor(weights.shape())};
  dense_accumulate_weights(grad_out, x, g.grad_weights);
  return g;
}

Tensor avg_pool2d_forward(const Tensor& input, std::size_t k) {
  check_pool("avg_pool2d_forward", input.shape(), k);
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = h / k, ow = w / k;
  Tensor out({c, oh, ow});
  const double inv = 1.0 / static_cast<double>(k * k);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < k; ++dy) {
          for (std::size_t dx = 0; dx < k; ++dx) acc += input.at(ch, oy * k + dy, ox * k + dx);
        }
        out.at(ch, oy, ox) = acc * inv;
      }
    }
  }
  return out;
}

Tensor avg_pool2d_backward(const Tensor& grad_out, const Shape& input_shape, std::size_t k) {
  check_pool("avg_pool2d_backward", input_shape, k);
  const std::size_t c = input_shape[0];
  const std::size_t oh = input_shape[1] / k, ow = input_shape[2] / k;
  if (grad_out.shape() != Shape{c, oh, ow}) {
    throw ShapeError("avg_pool2d_backward: grad_out expected " + shape_str({c, oh, ow}) +
                     ", got " + shape_str(grad_out.shape()));
  }
  Tensor gi(input_shape);
  const double inv = 1.0 / static_cast<double>(k * k);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double g = grad_out.at(ch, oy, ox) * inv;
        for (std::size_t dy = 0; dy < k; ++dy) {
          for (std::size_t dx = 0; dx < k; ++dx) gi.at(ch, oy * k + dy, ox * k + dx) = g;
        }
      }
    }
  }
  return gi;
}

Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& pre_activation) {
  require_same_shape(grad_out, pre_activation, "relu_backward");
  Tensor g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = pre_activation[i] > 0.0 ? grad_out[i] : 0.0;
  }
  return g;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

void add_inplace(Tensor& acc, const Tensor& b) {
  if (acc.size() != b.size()) require_same_shape(acc, b, "add_inplace");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += b[i];
}

void axpy_inplace(Tensor& acc, double alpha, const Tensor& b) {
  if (acc.size() != b.size()) require_same_shape(acc, b, "axpy_inplace");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += alpha * b[i];
}

double reduce_sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return s;
}

}  // namespace kernels

namespace reference {

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const ConvSpec& spec) {
  check_conv_operands("reference::conv2d_forward", input, weights, spec);
  const std::size_t h = input.dim(1), w = input.dim(2);
  const std::size_t oh = spec.out_h(h), ow = spec.out_w(w);
  Tensor out({spec.out_channels, oh, ow});
  for (std::size_t co = 0; co < spec.out_channels; ++co)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t ci = 0; ci < spec.in_channels; ++ci)
          for (std::size_t ky = 0; ky < spec.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * spec.stride + ky) -
                                        static_cast<std::ptrdiff_t>(spec.padding);
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * spec.stride + kx) -
                                        static_cast<std::ptrdiff_t>(spec.padding);
              if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                  ix >= static_cast<std::ptrdiff_t>(w))
                continue;
              out.at(co, oy, ox) +=
                  input.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                  weights[((co * spec.in_channels + ci) * spec.kernel_h + ky) * spec.kernel_w + kx];
            }
  return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights,
                          const ConvSpec& spec) {
  check_conv_operands("reference::conv2d_backward", input, weights, spec);
  const std::size_t h = input.dim(1), w = input.dim(2);
  const std::size_t oh = spec.out_h(h), ow = spec.out_w(w);
  if (grad_out.shape() != Shape{spec.out_channels, oh, ow}) {
    throw ShapeError("reference::conv2d_backward: grad_out shape " + shape_str(grad_out.shape()));
  }
  ConvGrads g{Tensor(input.shape()), Tensor(weights.shape())};
  for (std::size_t co = 0; co < spec.out_channels; ++co)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t ci = 0; ci < spec.in_channels; ++ci)
          for (std::size_t ky = 0; ky < spec.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * spec.stride + ky) -
                                        static_cast<std::ptrdiff_t>(spec.padding);
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * spec.stride + kx) -
                                        static_cast<std::ptrdiff_t>(spec.padding);
              if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                  ix >= static_cast<std::ptrdiff_t>(w))
                continue;
              const std::size_t widx =
                  ((co * spec.in_channels + ci) * spec.kernel_h + ky) * spec.kernel_w + kx;
              const auto uy = static_cast<std::size_t>(iy);
              const auto ux = static_cast<std::size_t>(ix);
              g.grad_weights[widx] += grad_out.at(co, oy, ox) * input.at(ci, uy, ux);
              g.grad_input.at(ci, uy, ux) += grad_out.at(co, oy, ox) * weights[widx];
            }
  return g;
}

Tensor dense_forward(const Tensor& x, const Tensor& weights) {
  check_dense_operands("reference::dense_forward", x, weights);
  Tensor y({weights.dim(0)});
  for (std::size_t o = 0; o < weights.dim(0); ++o)
    for (std::size_t i = 0; i < weights.dim(1); ++i) y[o] += weights[o * weights.dim(1) + i] * x[i];
  return y;
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& x, const Tensor& weights) {
  check_dense_operands("reference::dense_backward", x, weights);
  DenseGrads g{Tensor(x.shape()), Tensor(weights.shape())};
  for (std::size_t o = 0; o < weights.dim(0); ++o)
    for (std::size_t i = 0; i < weights.dim(1); ++i) {
      g.grad_weights[o * weights.dim(1) + i] += grad_out[o] * x[i];
      g.grad_input[i] += grad_out[o] * weights[o * weights.dim(1) + i];
    }
  return g;
}

Tensor avg_pool2d_forward(const Tensor& input, std::size_t k) {
  check_pool("reference::avg_pool2d_forward", input.shape(), k);
  Tensor out({input.dim(0), input.dim(1) / k, input.dim(2) / k});
  for (std::size_t c = 0; c < out.dim(0); ++c)
    for (std::size_t y = 0; y < out.dim(1) * k; ++y)
      for (std::size_t x = 0; x < out.dim(2) * k; ++x)
        out.at(c, y / k, x / k) += input.at(c, y, x) / static_cast<double>(k * k);
  return out;
}

}  // namespace reference

}  // namespace dietsnn
