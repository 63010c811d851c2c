#include "dietsnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dietsnn/kernels.hpp"
#include "dietsnn/rng.hpp"

namespace dietsnn {

const char* encoding_name(Encoding e) { return e == Encoding::direct ? "direct" : "poisson"; }

Encoding parse_encoding(const std::string& s) {
  if (s == "direct") return Encoding::direct;
  if (s == "poisson") return Encoding::poisson;
  throw std::invalid_argument("unknown encoding '" + s + "' (expected direct or poisson)");
}

Network Network::create(Architecture arch, std::vector<Tensor> weights, int timesteps,
                        Encoding encoding) {
  Network net;
  net.neurons.assign(arch.size(), LifParams{1.0, 1.0});
  net.arch = std::move(arch);
  net.weights = std::move(weights);
  net.timesteps = timesteps;
  net.encoding = encoding;
  net.validate();
  return net;
}

void Network::validate() const {
  if (timesteps < 1) {
    throw std::invalid_argument("network: timesteps must be >= 1, got " + std::to_string(timesteps));
  }
  if (weights.size() != arch.size() || neurons.size() != arch.size()) {
    throw std::invalid_argument("network: parameter lists do not match the layer count");
  }
  for (std::size_t i = 0; i < arch.size(); ++i) {
    if (arch.layer(i).has_weights() && weights[i].shape() != arch.weight_shape(i)) {
      throw ShapeError("network: layer " + std::to_string(i) + " weights are " +
                       shape_str(weights[i].shape()) + ", expected " +
                       shape_str(arch.weight_shape(i)));
    }
    if (arch.layer(i).is_spiking()) neurons[i].validate();
  }
}

std::vector<std::size_t> Network::spiking_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < arch.size(); ++i)
    if (arch.layer(i).is_spiking()) out.push_back(i);
  return out;
}

namespace {

Tensor weighted_sum(const LayerDef& def, const Tensor& x, const Tensor& w) {
  if (def.kind == LayerKind::conv) return kernels::conv2d_forward(x, w, def.conv);
  return kernels::dense_forward(x, w);
}

Tensor draw_dropout_mask(const Shape& shape, double p, Rng& rng) {
  Tensor mask(shape);
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask.values()) m = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

ForwardResult simulate(const Network& net, const Tensor& image, bool poisson,
                       std::uint64_t poisson_seed, const ForwardOptions& opts) {
  const Architecture& arch = net.arch;
  if (image.shape() != arch.input_shape()) {
    throw ShapeError("forward: image shape " + shape_str(image.shape()) +
                     " does not match network input " + shape_str(arch.input_shape()));
  }
  if (net.timesteps < 1) throw std::invalid_argument("forward: timesteps must be >= 1");
  if (poisson) {
    for (double p : image.values()) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("forward_poisson: pixel value " + std::to_string(p) +
                                    " outside [0,1]");
      }
    }
  }
  const std::size_t n_layers = arch.size();
  const std::size_t last = std::min(opts.stop_after_layer, n_layers - 1);
  const auto T = static_cast<std::size_t>(net.timesteps);

  // u^0 = 0 and o^0 = 0 for every sample.
  std::vector<LifState> state(n_layers);
  std::vector<Tensor> masks(n_layers);
  Rng dropout_rng(opts.dropout_seed);
  for (std::size_t l = 0; l <= last; ++l) {
    const LayerDef& def = arch.layer(l);
    if (def.is_spiking()) state[l] = LifState::zeros(arch.out_shape(l));
    if (def.kind == LayerKind::dropout && opts.training && def.drop_p > 0.0) {
      masks[l] = draw_dropout_mask(arch.in_shape(l), def.drop_p, dropout_rng);
    }
  }

  ForwardResult r;
  r.logits = Tensor({arch.classes()});
  r.spike_counts.assign(n_layers, 0);
  if (opts.record) {
    r.tape = Tape{net.timesteps, std::vector<std::vector<TapeStep>>(n_layers)};
    for (auto& s : r.tape->steps) s.reserve(T);
  }
  Rng poisson_rng(poisson_seed);

  for (std::size_t t = 0; t < T; ++t) {
    Tensor x;
    if (poisson) {
      x = Tensor(image.shape());
      for (std::size_t i = 0; i < x.size(); ++i) {
        const bool fire = poisson_rng.uniform() < image[i];
        x[i] = fire ? 1.0 : 0.0;
        r.input_spikes += fire ? 1 : 0;
      }
    } else {
      x = image;
    }

    for (std::size_t l = 0; l <= last; ++l) {
      const LayerDef& def = arch.layer(l);
      TapeStep step;
      if (opts.record) step.input = x;
      switch (def.kind) {
        case LayerKind::conv:
        case LayerKind::dense: {
          Tensor in = weighted_sum(def, x, net.weights[l]);
          LifStepResult s = lif_step(state[l], in, net.neurons[l]);
          std::uint64_t fired = 0;
          for (double o : s.spikes.values()) fired += o > 0.0 ? 1 : 0;
          r.spike_counts[l] += fired;
          if (opts.record) {
            step.weighted_input = std::move(in);
            step.prev_potential = state[l].potential;
            step.prev_spikes = state[l].spikes;
            step.potential = s.state.potential;
            step.z = std::move(s.z);
            step.spikes = s.spikes;
          }
          state[l] = std::move(s.state);
          x = std::move(s.spikes);
          break;
        }
        case LayerKind::avgpool:
          x = kernels::avg_pool2d_forward(x, def.pool);
          break;
        case LayerKind::dropout:
          if (!masks[l].empty()) {
            x = kernels::mul(x, masks[l]);
            if (opts.record) step.mask = masks[l];
          }
          break;
        case LayerKind::head: {
          Tensor in = kernels::dense_forward(x, net.weights[l]);
          kernels::add_inplace(r.logits, in);
          if (opts.record) step.weighted_input = std::move(in);
          break;
        }
      }
      if (opts.record) r.tape->steps[l].push_back(std::move(step));
    }
  }
  return r;
}

}  // namespace

ForwardResult forward_direct(const Network& net, const Tensor& image, const ForwardOptions& opts) {
  return simulate(net, image, false, 0, opts);
}

ForwardResult forward_poisson(const Network& net, const Tensor& image, std::uint64_t seed,
                              const ForwardOptions& opts) {
  return simulate(net, image, true, seed, opts);
}

ForwardResult forward(const Network& net, const Tensor& image, std::uint64_t poisson_seed,
                      const ForwardOptions& opts) {
  return simulate(net, image, net.encoding == Encoding::poisson, poisson_seed, opts);
}

Tensor forward_batch(const Network& net, const Tensor& images, std::uint64_t seed) {
  if (images.rank() != 4) {
    throw ShapeError("forward_batch: images must be [B,c,h,w], got " + shape_str(images.shape()));
  }
  const auto B = static_cast<std::int64_t>(images.dim(0));
  Tensor logits({images.dim(0), net.arch.classes()});
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t b = 0; b < B; ++b) {
    const auto ub = static_cast<std::uint64_t>(b);
    ForwardResult r =
        forward(net, images.slice(ub), derive_seed(seed, Stream::poisson, {ub}));
    logits.set_slice(ub, r.logits);
  }
  return logits;
}

Tensor softmax(const Tensor& logits) {
  Tensor s = logits;
  double m = -std::numeric_limits<double>::infinity();
  for (double v : s.values()) m = std::max(m, v);
  double sum = 0.0;
  for (double& v : s.values()) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : s.values()) v /= sum;
  return s;
}

LossResult softmax_cross_entropy(const Tensor& logits, const Tensor& one_hot) {
  require_same_shape(logits, one_hot, "softmax_cross_entropy");
  // log s_i = (u_i - m) - log(sum_k exp(u_k - m))
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logits.values()) m = std::max(m, v);
  double sum = 0.0;
  for (double v : logits.values()) sum += std::exp(v - m);
  const double log_z = std::log(sum);
  LossResult r{0.0, Tensor(logits.shape())};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double log_s = logits[i] - m - log_z;
    if (one_hot[i] != 0.0) r.loss -= one_hot[i] * log_s;
    r.grad[i] = std::exp(log_s) - one_hot[i];
  }
  return r;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  if (label >= logits.size()) {
    throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(logits.size()) + " classes");
  }
  Tensor y(logits.shape());
  y[label] = 1.0;
  return softmax_cross_entropy(logits, y);
}

std::size_t argmax(const Tensor& logits) {
  return static_cast<std::size_t>(
      std::distance(logits.values().begin(),
                    std::max_element(logits.values().begin(), logits.values().end())));
}

}  // namespace dietsnn
