#ifndef DIETSNN_NETWORK_HPP
#define DIETSNN_NETWORK_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "dietsnn/architecture.hpp"
#include "dietsnn/neuron.hpp"
#include "dietsnn/tensor.hpp"

namespace dietsnn {

enum class Encoding { direct, poisson };

const char* encoding_name(Encoding e);
Encoding parse_encoding(const std::string& s);

/// Spiking network: weights, one (leak, threshold) per spiking layer, the
/// input encoding and the number of timesteps T.
struct Network {
  Architecture arch;
  std::vector<Tensor> weights;     // per layer; empty for pool/dropout
  std::vector<LifParams> neurons;  // per layer; used by conv/dense only
  Encoding encoding = Encoding::direct;
  int timesteps = 5;

  /// IF neurons (leak 1) with unit thresholds.
  static Network create(Architecture arch, std::vector<Tensor> weights, int timesteps,
                        Encoding encoding = Encoding::direct);
  /// Throws when weights, neuron parameters or T are inconsistent.
  void validate() const;
  std::vector<std::size_t> spiking_layers() const;
};

/// Forward record of one layer at one timestep; the storage behind the sums
/// over t in the backward pass.
struct TapeStep {
  Tensor input;           // x^t reaching the layer (image, spikes or pooled spikes)
  Tensor weighted_input;  // W x^t (weighted layers)
  Tensor prev_potential;  // u^{t-1}
  Tensor prev_spikes;     // o^{t-1}
  Tensor potential;       // u^t
  Tensor z;               // u^t / v - 1
  Tensor spikes;          // o^t
  Tensor mask;            // dropout mask (already scaled by 1/(1-p))
};

/// tape.steps[layer][t]
struct Tape {
  int timesteps = 0;
  std::vector<std::vector<TapeStep>> steps;
};

struct ForwardOptions {
  bool record = false;
  /// Enables dropout. Masks are drawn once per sample from dropout_seed.
  bool training = false;
  std::uint64_t dropout_seed = 0;
  /// Stops the simulation after this layer (calibration). Logits stay zero.
  std::size_t stop_after_layer = std::numeric_limits<std::size_t>::max();
};

struct ForwardResult {
  Tensor logits;  // output accumulator at t = T, shape [N]
  std::optional<Tape> tape;
  /// Spikes emitted per layer over all timesteps (0 for non-spiking layers).
  std::vector<std::uint64_t> spike_counts;
  /// Input spikes generated by the Poisson encoder (0 for direct encoding).
  std::uint64_t input_spikes = 0;
};

/// The analog image is presented to the first layer at every timestep.
ForwardResult forward_direct(const Network& net, const Tensor& image,
                             const ForwardOptions& opts = {});

/// Rate-coded input: pixel p fires at a timestep iff a uniform draw < p.
/// Pixels must lie in [0, 1].
ForwardResult forward_poisson(const Network& net, const Tensor& image, std::uint64_t seed,
                              const ForwardOptions& opts = {});

/// Dispatches on net.encoding; `poisson_seed` is ignored for direct encoding.
ForwardResult forward(const Network& net, const Tensor& image, std::uint64_t poisson_seed,
                      const ForwardOptions& opts = {});

/// Inference over a batch [B, c, h, w] -> logits [B, N]. Samples run in
/// parallel; sample b uses Poisson seed derive_seed(seed, poisson, {b}).
Tensor forward_batch(const Network& net, const Tensor& images, std::uint64_t seed = 0);

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // dL/dlogits = softmax - onehot
};

LossResult softmax_cross_entropy(const Tensor& logits, std::size_t label);
LossResult softmax_cross_entropy(const Tensor& logits, const Tensor& one_hot);
Tensor softmax(const Tensor& logits);
std::size_t argmax(const Tensor& logits);

}  // namespace dietsnn

#endif  // DIETSNN_NETWORK_HPP
