#ifndef DIETSNN_BPTT_HPP
#define DIETSNN_BPTT_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dietsnn/dataset.hpp"
#include "dietsnn/network.hpp"
#include "dietsnn/neuron.hpp"

namespace dietsnn {

/// Gradients summed over timesteps: dL/dW, dL/dv, dL/d(leak) per layer.
struct GradAccum {
  std::vector<Tensor> weights;
  std::vector<double> threshold;
  std::vector<double> leak;

  static GradAccum zeros(const Network& net);
  void add(const GradAccum& other);
  void scale(double s);
  bool all_finite() const;
};

/// Full unroll over all T timesteps of the tape. The adjoint of u^t carries
/// the leak recurrence (leak * u^{t-1}) and the soft-reset path (-v o^{t-1})
/// back in time; the spike nonlinearity uses surrogate_grad.
GradAccum backward(const Tape& tape, const Network& net, const Tensor& dl_dlogits,
                   const SurrogateCfg& surrogate = {});

/// Same quantities split into the contribution computed at each timestep;
/// their sum equals backward().
std::vector<GradAccum> backward_per_timestep(const Tape& tape, const Network& net,
                                             const Tensor& dl_dlogits,
                                             const SurrogateCfg& surrogate = {});

enum class OptimizerKind { sgd, adam };

const char* optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  /// Multiplies lr for thresholds and leaks.
  double neuron_lr_scale = 1.0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Step decay: lr *= lr_decay every lr_decay_every epochs (0 disables).
  int lr_decay_every = 0;
  double lr_decay = 0.1;
  SurrogateCfg surrogate;
  std::uint64_t seed = 1;
  double leak_min = 0.0;
  double leak_max = 1.0;
  double threshold_floor = 1e-3;
  bool train_weights = true;
  bool train_threshold = true;
  bool train_leak = true;

  void validate() const;
};

/// Per-parameter-slot optimizer memory (momentum or Adam moments).
class OptimizerState {
 public:
  OptimizerState() = default;
  explicit OptimizerState(const TrainConfig& cfg);

  double lr = 0.0;
  std::size_t skipped_batches = 0;

  /// Starts a new update (advances the Adam bias-correction counter).
  void begin_step() { ++step_; }
  /// Updates `param` in place from `grad`. Slots are stable indices chosen by
  /// the caller; memory is allocated on first use.
  void update(std::size_t slot, std::span<double> param, std::span<const double> grad,
              double lr_scale = 1.0);

 private:
  OptimizerKind kind_ = OptimizerKind::adam;
  double momentum_ = 0.9, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Steps the enabled parameter groups, then clamps leak into
/// [leak_min, leak_max] and threshold to >= threshold_floor. A non-finite
/// gradient skips the whole update (counted in opt.skipped_batches) and
/// returns false.
bool apply_update(Network& net, const GradAccum& grads, OptimizerState& opt,
                  const TrainConfig& cfg);

struct EpochMetrics {
  int epoch = 0;
  std::string split;  // "train" or "val"
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> spike_rates;  // one per spiking layer
};

struct TrainReport {
  std::vector<EpochMetrics> metrics;
  std::size_t skipped_batches = 0;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<std::uint64_t> spike_counts;  // per layer, all samples and timesteps
  std::uint64_t input_spikes = 0;
  std::size_t samples = 0;
  /// total spikes / (neurons * samples) per spiking layer
  std::vector<double> spike_rates(const Network& net) const;
};

/// Inference over a dataset (dropout off). Poisson streams derive from seed.
EvalResult evaluate(const Network& net, const Dataset& data, std::uint64_t seed = 0);

/// Minibatch BPTT training with loss at the final timestep. Batch gradient is
/// the mean over samples; per-sample work runs in parallel and is reduced in
/// sample order so results do not depend on the thread count.
TrainReport train_epochs(Network& net, const Dataset& train, const Dataset* val,
                         const TrainConfig& cfg);

/// Samples per batch for epoch `epoch` (seeded shuffle).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

}  // namespace dietsnn

#endif  // DIETSNN_BPTT_HPP
