#include "dietsnn/bptt.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "dietsnn/kernels.hpp"
#include "dietsnn/rng.hpp"

namespace dietsnn {

GradAccum GradAccum::zeros(const Network& net) {
  GradAccum g;
  g.weights.resize(net.arch.size());
  for (std::size_t i = 0; i < net.arch.size(); ++i) {
    if (net.arch.layer(i).has_weights()) g.weights[i] = Tensor(net.arch.weight_shape(i));
  }
  g.threshold.assign(net.arch.size(), 0.0);
  g.leak.assign(net.arch.size(), 0.0);
  return g;
}

void GradAccum::add(const GradAccum& other) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!weights[i].empty()) kernels::add_inplace(weights[i], other.weights[i]);
    threshold[i] += other.threshold[i];
    leak[i] += other.leak[i];
  }
}

void GradAccum::scale(double s) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    for (double& v : weights[i].values()) v *= s;
    threshold[i] *= s;
    leak[i] *= s;
  }
}

bool GradAccum::all_finite() const {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!weights[i].all_finite() || !std::isfinite(threshold[i]) || !std::isfinite(leak[i]))
      return false;
  }
  return true;
}

namespace {

void check_tape(const Tape& tape, const Network& net, const Tensor& dl_dlogits) {
  const auto T = static_cast<std::size_t>(net.timesteps);
  if (tape.timesteps != net.timesteps || tape.steps.size() != net.arch.size()) {
    throw std::invalid_argument("backward: tape (" + std::to_string(tape.steps.size()) +
                                " layers, T=" + std::to_string(tape.timesteps) +
                                ") does not match network (" + std::to_string(net.arch.size()) +
                                " layers, T=" + std::to_string(net.timesteps) + ")");
  }
  for (std::size_t l = 0; l < tape.steps.size(); ++l) {
    if (tape.steps[l].size() != T) {
      throw std::invalid_argument("backward: tape layer " + std::to_string(l) + " holds " +
                                  std::to_string(tape.steps[l].size()) + " timesteps, expected " +
                                  std::to_string(T));
    }
  }
  if (dl_dlogits.size() != net.arch.classes()) {
    throw ShapeError("backward: dL/dlogits has " + std::to_string(dl_dlogits.size()) +
                     " entries, network has " + std::to_string(net.arch.classes()) + " classes");
  }
}

// Writes every contribution into per_t[t] (one GradAccum per timestep).
void backward_into(const Tape& tape, const Network& net, const Tensor& dl_dlogits,
                   const SurrogateCfg& surrogate, std::vector<GradAccum>& per_t) {
  check_tape(tape, net, dl_dlogits);
  const Architecture& arch = net.arch;
  const std::size_t n_layers = arch.size();
  const auto T = static_cast<std::size_t>(net.timesteps);

  // grads[t]: dL/d(output of the layer being processed) at timestep t.
  std::vector<Tensor> grads(T);

  // Output head: u_out^T = sum_t W x^t, so dL/dW = (s - y) (x) sum_t x^t and
  // dL/dx^t = W^T (s - y) for every t.
  {
    const std::size_t l = n_layers - 1;
    const Tensor& w = net.weights[l];
    const Tensor gx = kernels::dense_backward_input(dl_dlogits, w, arch.in_shape(l));
    for (std::size_t t = 0; t < T; ++t) {
      kernels::dense_accumulate_weights(dl_dlogits, tape.steps[l][t].input, per_t[t].weights[l]);
      grads[t] = gx;
    }
  }

  for (std::size_t li = n_layers - 1; li-- > 0;) {
    const LayerDef& def = arch.layer(li);
    const auto& steps = tape.steps[li];
    switch (def.kind) {
      case LayerKind::dropout:
        for (std::size_t t = 0; t < T; ++t) {
          if (!steps[t].mask.empty()) grads[t] = kernels::mul(grads[t], steps[t].mask);
        }
        break;
      case LayerKind::avgpool:
        for (std::size_t t = 0; t < T; ++t) {
          grads[t] = kernels::avg_pool2d_backward(grads[t], arch.in_shape(li), def.pool);
        }
        break;
      case LayerKind::conv:
      case LayerKind::dense: {
        const double v = net.neurons[li].threshold;
        const double leak = net.neurons[li].leak;
        const bool need_input_grad = li > 0;
        const Shape& out_shape = arch.out_shape(li);
        const std::size_t n = shape_numel(out_shape);
        Tensor du_next(out_shape);  // dL/du^{t+1}, zero past the last step
        std::vector<Tensor> grad_in(need_input_grad ? T : 0);

        for (std::size_t t = T; t-- > 0;) {
          const TapeStep& s = steps[t];
          // dL/do^t: downstream layers plus the reset term -v o^t in u^{t+1}.
          const Tensor& g_down = grads[t];
          const Tensor sg = surrogate_grad(s.z, surrogate);
          const Tensor dz_dv = grad_z_wrt_threshold(s.potential, s.prev_spikes, v);
          const Tensor du_dleak = grad_u_wrt_leak(s.prev_potential);
          Tensor du(out_shape);
          double g_thr = 0.0;
          double g_leak = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const double g_o = g_down[i] - v * du_next[i];
            const double dz = g_o * sg[i];
            const double carry = leak * du_next[i];
            du[i] = dz / v + carry;
            g_thr += dz * dz_dv[i] - carry * s.prev_spikes[i];
            g_leak += du[i] * du_dleak[i];
          }
          GradAccum& acc = per_t[t];
          acc.threshold[li] += g_thr;
          acc.leak[li] += g_leak;
          if (def.kind == LayerKind::conv) {
            kernels::add_inplace(acc.weights[li],
                                 kernels::conv2d_backward_weights(du, s.input, def.conv));
            if (need_input_grad) {
              grad_in[t] =
                  kernels::conv2d_backward_input(du, net.weights[li], arch.in_shape(li), def.conv);
            }
          } else {
            kernels::dense_accumulate_weights(du, s.input, acc.weights[li]);
            if (need_input_grad) {
              grad_in[t] = kernels::dense_backward_input(du, net.weights[li], arch.in_shape(li));
            }
          }
          du_next = std::move(du);
        }
        grads = std::move(grad_in);
        break;
      }
      case LayerKind::head:
        throw std::logic_error("backward: head must be the last layer");
    }
    if (grads.empty()) break;
  }
}

}  // namespace

GradAccum backward(const Tape& tape, const Network& net, const Tensor& dl_dlogits,
                   const SurrogateCfg& surrogate) {
  std::vector<GradAccum> per_t = backward_per_timestep(tape, net, dl_dlogits, surrogate);
  GradAccum total = std::move(per_t.front());
  for (std::size_t t = 1; t < per_t.size(); ++t) total.add(per_t[t]);
  return total;
}

std::vector<GradAccum> backward_per_timestep(const Tape& tape, const Network& net,
                                             const Tensor& dl_dlogits,
                                             const SurrogateCfg& surrogate) {
  std::vector<GradAccum> per_t(static_cast<std::size_t>(std::max(net.timesteps, 1)),
                               GradAccum::zeros(net));
  backward_into(tape, net, dl_dlogits, surrogate, per_t);
  return per_t;
}

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("train config: " + field + " " + why);
  };
  if (epochs < 0) fail("epochs", "must be >= 0");
  if (batch_size == 0) fail("batch_size", "must be >= 1");
  if (!(lr >= 0.0)) fail("lr", "must be >= 0");
  if (!(neuron_lr_scale >= 0.0)) fail("neuron_lr_scale", "must be >= 0");
  if (!(surrogate.gamma > 0.0)) fail("gamma", "must be > 0");
  if (!(threshold_floor > 0.0)) fail("threshold_floor", "must be > 0");
  if (!(leak_min >= 0.0 && leak_max <= 1.0 && leak_min <= leak_max))
    fail("leak bounds", "must satisfy 0 <= leak_min <= leak_max <= 1");
  if (lr_decay_every < 0) fail("lr_decay_every", "must be >= 0");
}

OptimizerState::OptimizerState(const TrainConfig& cfg)
    : lr(cfg.lr),
      kind_(cfg.optimizer),
      momentum_(cfg.momentum),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.adam_eps) {}

void OptimizerState::update(std::size_t slot, std::span<double> param,
                            std::span<const double> grad, double lr_scale) {
  if (slot >= m_.size()) {
    m_.resize(slot + 1);
    v_.resize(slot + 1);
  }
  auto& m = m_[slot];
  if (m.size() != param.size()) m.assign(param.size(), 0.0);
  const double eta = lr * lr_scale;
  if (kind_ == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = momentum_ * m[i] + grad[i];
      param[i] -= eta * m[i];
    }
    return;
  }
  auto& v = v_[slot];
  if (v.size() != param.size()) v.assign(param.size(), 0.0);
  const long step = std::max(step_, 1L);
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
    v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] -= eta * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

bool apply_update(Network& net, const GradAccum& grads, OptimizerState& opt,
                  const TrainConfig& cfg) {
  if (!grads.all_finite()) {
    ++opt.skipped_batches;
    std::cerr << "warning: non-finite gradient, skipping update (" << opt.skipped_batches
              << " skipped so far)\n";
    return false;
  }
  opt.begin_step();
  for (std::size_t l = 0; l < net.arch.size(); ++l) {
    const LayerDef& def = net.arch.layer(l);
    if (cfg.train_weights && def.has_weights()) {
      opt.update(3 * l, net.weights[l].values(), grads.weights[l].values());
    }
    if (!def.is_spiking()) continue;
    LifParams& p = net.neurons[l];
    if (cfg.train_threshold) {
      opt.update(3 * l + 1, std::span<double>(&p.threshold, 1),
                 std::span<const double>(&grads.threshold[l], 1), cfg.neuron_lr_scale);
    }
    if (cfg.train_leak) {
      opt.update(3 * l + 2, std::span<double>(&p.leak, 1),
                 std::span<const double>(&grads.leak[l], 1), cfg.neuron_lr_scale);
    }
    p.leak = std::clamp(p.leak, cfg.leak_min, cfg.leak_max);
    p.threshold = std::max(p.threshold, cfg.threshold_floor);
  }
  return true;
}

std::vector<double> EvalResult::spike_rates(const Network& net) const {
  std::vector<double> rates;
  for (std::size_t l : net.spiking_layers()) {
    const double neurons = static_cast<double>(shape_numel(net.arch.out_shape(l)));
    rates.push_back(samples ? static_cast<double>(spike_counts[l]) /
                                  (neurons * static_cast<double>(samples))
                            : 0.0);
  }
  return rates;
}

EvalResult evaluate(const Network& net, const Dataset& data, std::uint64_t seed) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  net.validate();
  const auto n = static_cast<std::int64_t>(data.size());
  std::vector<double> losses(data.size());
  std::vector<char> correct(data.size());
  std::vector<std::vector<std::uint64_t>> counts(data.size());
  std::vector<std::uint64_t> input_spikes(data.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    ForwardResult r = forward(net, data.image(ui), derive_seed(seed, Stream::poisson, {ui}));
    losses[ui] = softmax_cross_entropy(r.logits, data.labels[ui]).loss;
    correct[ui] = argmax(r.logits) == data.labels[ui];
    counts[ui] = std::move(r.spike_counts);
    input_spikes[ui] = r.input_spikes;
  }
  EvalResult e;
  e.samples = data.size();
  e.spike_counts.assign(net.arch.size(), 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    e.loss += losses[i];
    hits += correct[i] ? 1 : 0;
    for (std::size_t l = 0; l < net.arch.size(); ++l) e.spike_counts[l] += counts[i][l];
    e.input_spikes += input_spikes[i];
  }
  e.loss /= static_cast<double>(data.size());
  e.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  return e;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, Stream::shuffle, {static_cast<std::uint64_t>(epoch)}));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

TrainReport train_epochs(Network& net, const Dataset& train, const Dataset* val,
                         const TrainConfig& cfg) {
  if (train.size() == 0) throw std::invalid_argument("train_epochs: empty dataset");
  cfg.validate();
  net.validate();
  OptimizerState opt(cfg);
  TrainReport report;
  const std::size_t n_layers = net.arch.size();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.lr_decay_every > 0 && epoch > 1 && (epoch - 1) % cfg.lr_decay_every == 0) {
      opt.lr *= cfg.lr_decay;
    }
    const auto order = epoch_order(train.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    std::vector<std::uint64_t> spikes(n_layers, 0);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t bsz = std::min(cfg.batch_size, order.size() - start);
      std::vector<GradAccum> sample_grads(bsz);
      std::vector<double> losses(bsz);
      std::vector<char> correct(bsz);
      std::vector<std::vector<std::uint64_t>> counts(bsz);
      const Network& frozen = net;
#pragma omp parallel for schedule(dynamic)
      for (std::int64_t b = 0; b < static_cast<std::int64_t>(bsz); ++b) {
        const auto ub = static_cast<std::size_t>(b);
        const std::size_t idx = order[start + ub];
        const auto key = {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx)};
        ForwardOptions fo;
        fo.record = true;
        fo.training = true;
        fo.dropout_seed = derive_seed(cfg.seed, Stream::dropout, key);
        ForwardResult r =
            forward(frozen, train.image(idx), derive_seed(cfg.seed, Stream::poisson, key), fo);
        LossResult lr = softmax_cross_entropy(r.logits, train.labels[idx]);
        losses[ub] = lr.loss;
        correct[ub] = argmax(r.logits) == train.labels[idx];
        counts[ub] = std::move(r.spike_counts);
        sample_grads[ub] = backward(*r.tape, frozen, lr.grad, cfg.surrogate);
      }
      GradAccum total = std::move(sample_grads[0]);
      for (std::size_t b = 1; b < bsz; ++b) total.add(sample_grads[b]);
      total.scale(1.0 / static_cast<double>(bsz));
      for (std::size_t b = 0; b < bsz; ++b) {
        loss_sum += losses[b];
        hits += correct[b] ? 1 : 0;
        for (std::size_t l = 0; l < n_layers; ++l) spikes[l] += counts[b][l];
      }
      apply_update(net, total, opt, cfg);
    }

    EvalResult tr;
    tr.samples = train.size();
    tr.spike_counts = spikes;
    EpochMetrics m{epoch, "train", loss_sum / static_cast<double>(train.size()),
                   static_cast<double>(hits) / static_cast<double>(train.size()),
                   tr.spike_rates(net)};
    report.metrics.push_back(std::move(m));
    if (val != nullptr && val->size() > 0) {
      EvalResult ev = evaluate(net, *val, derive_seed(cfg.seed, Stream::poisson,
                                                      {static_cast<std::uint64_t>(epoch), 1u << 30}));
      report.metrics.push_back({epoch, "val", ev.loss, ev.accuracy, ev.spike_rates(net)});
    }
  }
  report.skipped_batches = opt.skipped_batches;
  return report;
}

}  // namespace dietsnn
