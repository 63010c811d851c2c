#include "dietsnn/neuron.hpp"

#include <cmath>
#include <string>

namespace dietsnn {

void LifParams::validate() const {
  if (!(threshold > 0.0) || !std::isfinite(threshold)) {
    throw std::invalid_argument("LifParams: threshold must be positive and finite, got " +
                                std::to_string(threshold));
  }
  if (!(leak >= 0.0 && leak <= 1.0)) {
    throw std::invalid_argument("LifParams: leak must lie in [0,1], got " + std::to_string(leak));
  }
}

LifStepResult lif_step(const LifState& state, const Tensor& weighted_input,
                       const LifParams& params) {
  params.validate();
  require_same_shape(state.potential, weighted_input, "lif_step");
  require_same_shape(state.spikes, weighted_input, "lif_step");

  const double lambda = params.leak;
  const double v = params.threshold;
  const std::size_t n = weighted_input.size();
  LifStepResult r{LifState::zeros(weighted_input.shape()), Tensor(weighted_input.shape()),
                  Tensor(weighted_input.shape())};
  const double* u_prev = state.potential.data();
  const double* o_prev = state.spikes.data();
  const double* in = weighted_input.data();
  double* u = r.state.potential.data();
  double* o = r.state.spikes.data();
  double* z = r.z.data();
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = lambda * u_prev[i] + in[i] - v * o_prev[i];
    z[i] = u[i] / v - 1.0;
    o[i] = z[i] > 0.0 ? 1.0 : 0.0;
  }
  r.spikes = r.state.spikes;
  return r;
}

LifStepResult if_step(const LifState& state, const Tensor& weighted_input, double threshold) {
  return lif_step(state, weighted_input, LifParams{1.0, threshold});
}

double surrogate_grad(double z, const SurrogateCfg& cfg) {
  const double hat = 1.0 - std::abs(z);
  return hat > 0.0 ? cfg.gamma * hat : 0.0;
}

Tensor surrogate_grad(const Tensor& z, const SurrogateCfg& cfg) {
  Tensor g(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) g[i] = surrogate_grad(z[i], cfg);
  return g;
}

double grad_z_wrt_threshold(double potential, double prev_spike, double threshold) {
  return (-threshold * prev_spike - potential) / (threshold * threshold);
}

Tensor grad_z_wrt_threshold(const Tensor& potential, const Tensor& prev_spikes,
                            double threshold) {
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("grad_z_wrt_threshold: threshold must be positive, got " +
                                std::to_string(threshold));
  }
  require_same_shape(potential, prev_spikes, "grad_z_wrt_threshold");
  Tensor g(potential.shape());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = grad_z_wrt_threshold(potential[i], prev_spikes[i], threshold);
  }
  return g;
}

Tensor grad_u_wrt_leak(const Tensor& prev_potential) { return prev_potential; }

}  // namespace dietsnn
