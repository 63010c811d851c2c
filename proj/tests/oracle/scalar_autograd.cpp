#include "scalar_autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracle {

Graph::Id Graph::push(double value, Id a, double da, Id b, double db) {
  nodes_.push_back({value, 0.0, a, b, da, db});
  return static_cast<Id>(nodes_.size() - 1);
}

Graph::Id Graph::leaf(double v) { return push(v, -1, 0.0); }
Graph::Id Graph::add(Id a, Id b) { return push(value(a) + value(b), a, 1.0, b, 1.0); }
Graph::Id Graph::sub(Id a, Id b) { return push(value(a) - value(b), a, 1.0, b, -1.0); }
Graph::Id Graph::mul(Id a, Id b) { return push(value(a) * value(b), a, value(b), b, value(a)); }
Graph::Id Graph::div(Id a, Id b) {
  const double x = value(a), y = value(b);
  return push(x / y, a, 1.0 / y, b, -x / (y * y));
}
Graph::Id Graph::scale(Id a, double s) { return push(value(a) * s, a, s); }
Graph::Id Graph::add_const(Id a, double c) { return push(value(a) + c, a, 1.0); }
Graph::Id Graph::exp(Id a) {
  const double e = std::exp(value(a));
  return push(e, a, e);
}
Graph::Id Graph::log(Id a) { return push(std::log(value(a)), a, 1.0 / value(a)); }
Graph::Id Graph::spike(Id z, double gamma) {
  const double v = value(z);
  return push(v > 0.0 ? 1.0 : 0.0, z, gamma * std::max(0.0, 1.0 - std::abs(v)));
}

void Graph::backward(Id out) {
  for (Node& n : nodes_) n.grad = 0.0;
  nodes_[static_cast<std::size_t>(out)].grad = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.a >= 0) nodes_[static_cast<std::size_t>(n.a)].grad += n.grad * n.da;
    if (n.b >= 0) nodes_[static_cast<std::size_t>(n.b)].grad += n.grad * n.db;
  }
}

using dietsnn::LayerKind;
using Id = Graph::Id;

Gradients unrolled(const dietsnn::Network& net, const std::vector<std::vector<double>>& inputs,
                   const std::vector<std::vector<double>>& masks, std::size_t label,
                   double gamma) {
  const auto& arch = net.arch;
  const std::size_t L = arch.size();
  const auto T = static_cast<std::size_t>(net.timesteps);
  if (inputs.size() != T) throw std::invalid_argument("oracle: one input per timestep");
  Graph g;

  std::vector<std::vector<Id>> w(L);
  std::vector<Id> thr(L, -1), leak(L, -1);
  for (std::size_t l = 0; l < L; ++l) {
    if (arch.layer(l).has_weights()) {
      for (double x : net.weights[l].values()) w[l].push_back(g.leaf(x));
    }
    if (arch.layer(l).is_spiking()) {
      thr[l] = g.leaf(net.neurons[l].threshold);
      leak[l] = g.leaf(net.neurons[l].leak);
    }
  }

  std::vector<std::vector<Id>> u(L), o(L);
  for (std::size_t l = 0; l < L; ++l) {
    if (!arch.layer(l).is_spiking()) continue;
    const std::size_t n = dietsnn::shape_numel(arch.out_shape(l));
    u[l].assign(n, g.constant(0.0));
    o[l].assign(n, g.constant(0.0));
  }
  std::vector<Id> logits(arch.classes(), g.constant(0.0));

  for (std::size_t t = 0; t < T; ++t) {
    std::vector<Id> x;
    for (double v : inputs[t]) x.push_back(g.constant(v));
    for (std::size_t l = 0; l < L; ++l) {
      const auto& def = arch.layer(l);
      const auto& is = arch.in_shape(l);
      const auto& os = arch.out_shape(l);
      std::vector<Id> y;
      if (def.kind == LayerKind::conv) {
        const auto& c = def.conv;
        const std::size_t H = is[1], W = is[2], OH = os[1], OW = os[2];
        for (std::size_t co = 0; co < c.out_channels; ++co)
          for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
              Id s = g.constant(0.0);
              for (std::size_t ci = 0; ci < c.in_channels; ++ci)
                for (std::size_t ky = 0; ky < c.kernel_h; ++ky)
                  for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
                    const long iy = static_cast<long>(oy * c.stride + ky) - static_cast<long>(c.padding);
                    const long ix = static_cast<long>(ox * c.stride + kx) - static_cast<long>(c.padding);
                    if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W))
                      continue;
                    const std::size_t wi = ((co * c.in_channels + ci) * c.kernel_h + ky) * c.kernel_w + kx;
                    const std::size_t xi = (ci * H + static_cast<std::size_t>(iy)) * W +
                                           static_cast<std::size_t>(ix);
                    s = g.add(s, g.mul(w[l][wi], x[xi]));
                  }
              y.push_back(s);
            }
      } else if (def.kind == LayerKind::dense || def.kind == LayerKind::head) {
        const std::size_t fin = x.size();
        for (std::size_t j = 0; j < def.out_features; ++j) {
          Id s = g.constant(0.0);
          for (std::size_t i = 0; i < fin; ++i) s = g.add(s, g.mul(w[l][j * fin + i], x[i]));
          y.push_back(s);
        }
      } else if (def.kind == LayerKind::avgpool) {
        const std::size_t k = def.pool, H = is[1], W = is[2];
        for (std::size_t ch = 0; ch < os[0]; ++ch)
          for (std::size_t oy = 0; oy < os[1]; ++oy)
            for (std::size_t ox = 0; ox < os[2]; ++ox) {
              Id s = g.constant(0.0);
              for (std::size_t dy = 0; dy < k; ++dy)
                for (std::size_t dx = 0; dx < k; ++dx)
                  s = g.add(s, x[(ch * H + oy * k + dy) * W + ox * k + dx]);
              y.push_back(g.scale(s, 1.0 / static_cast<double>(k * k)));
            }
      } else if (def.kind == LayerKind::dropout) {
        y = x;
        if (l < masks.size() && !masks[l].empty()) {
          for (std::size_t i = 0; i < y.size(); ++i) y[i] = g.mul(y[i], g.constant(masks[l][i]));
        }
      }

      if (def.is_spiking()) {
        for (std::size_t i = 0; i < y.size(); ++i) {
          // u = leak * u_prev + I - v * o_prev ; o = H(u / v - 1)
          const Id un = g.sub(g.add(g.mul(leak[l], u[l][i]), y[i]), g.mul(thr[l], o[l][i]));
          const Id z = g.add_const(g.div(un, thr[l]), -1.0);
          u[l][i] = un;
          o[l][i] = g.spike(z, gamma);
        }
        x = o[l];
      } else if (def.kind == LayerKind::head) {
        for (std::size_t j = 0; j < y.size(); ++j) logits[j] = g.add(logits[j], y[j]);
      } else {
        x = std::move(y);
      }
    }
  }

  Id sum = g.constant(0.0);
  double m = g.value(logits[0]);
  for (Id id : logits) m = std::max(m, g.value(id));
  for (Id id : logits) sum = g.add(sum, g.exp(g.add_const(id, -m)));
  const Id loss = g.sub(g.add_const(g.log(sum), m), logits.at(label));
  g.backward(loss);

  Gradients r;
  r.loss = g.value(loss);
  for (Id id : logits) r.logits.push_back(g.value(id));
  r.weights.resize(L);
  r.threshold.assign(L, 0.0);
  r.leak.assign(L, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    for (Id id : w[l]) r.weights[l].push_back(g.grad(id));
    if (thr[l] >= 0) {
      r.threshold[l] = g.grad(thr[l]);
      r.leak[l] = g.grad(leak[l]);
    }
  }
  return r;
}

std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double h) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("rel_err: size mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

}  // namespace oracle
