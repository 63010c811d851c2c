#ifndef DIETSNN_NEURON_HPP
#define DIETSNN_NEURON_HPP

#include <stdexcept>

#include "dietsnn/tensor.hpp"

namespace dietsnn {

/// Leak and firing threshold shared by every neuron of one layer.
struct LifParams {
  double leak = 1.0;       // in [0, 1]
  double threshold = 1.0;  // > 0

  /// Throws std::invalid_argument on leak outside [0,1] or threshold <= 0.
  void validate() const;
  friend bool operator==(const LifParams&, const LifParams&) = default;
};

/// Membrane potential u^{t-1} and the spikes o^{t-1} of the previous step.
struct LifState {
  Tensor potential;
  Tensor spikes;

  static LifState zeros(const Shape& shape) { return {Tensor(shape), Tensor(shape)}; }
};

struct SurrogateCfg {
  double gamma = 0.3;
};

struct LifStepResult {
  LifState state;  // (u^t, o^t)
  Tensor spikes;   // o^t
  Tensor z;        // u^t / v - 1
};

/// One timestep of the leaky integrate-and-fire update with soft reset:
///   u^t = leak * u^{t-1} + weighted_input - threshold * o^{t-1}
///   z^t = u^t / threshold - 1,   o^t = [z^t > 0]
LifStepResult lif_step(const LifState& state, const Tensor& weighted_input,
                       const LifParams& params);

/// Integrate-and-fire: lif_step with leak fixed at 1.
LifStepResult if_step(const LifState& state, const Tensor& weighted_input, double threshold);

/// Piecewise-linear pseudo-derivative of the spike: gamma * max(0, 1 - |z|).
Tensor surrogate_grad(const Tensor& z, const SurrogateCfg& cfg);
double surrogate_grad(double z, const SurrogateCfg& cfg);

/// dz^t/dv with u^{t-1} held fixed: (-v * o^{t-1} - u^t) / v^2.
Tensor grad_z_wrt_threshold(const Tensor& potential, const Tensor& prev_spikes, double threshold);
double grad_z_wrt_threshold(double potential, double prev_spike, double threshold);

/// du^t/d(leak) = u^{t-1}.
Tensor grad_u_wrt_leak(const Tensor& prev_potential);

}  // namespace dietsnn

#endif  // DIETSNN_NEURON_HPP
