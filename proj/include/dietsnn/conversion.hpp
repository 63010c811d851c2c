#ifndef DIETSNN_CONVERSION_HPP
#define DIETSNN_CONVERSION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dietsnn/architecture.hpp"
#include "dietsnn/bptt.hpp"
#include "dietsnn/dataset.hpp"
#include "dietsnn/network.hpp"

namespace dietsnn {

/// ReLU network with the spiking network's topology: no bias, no batch
/// normalization, average pooling only.
struct AnnNetwork {
  Architecture arch;
  std::vector<Tensor> weights;

  static AnnNetwork create(Architecture arch, std::uint64_t seed);
  void validate() const;
};

/// Per-layer activations kept for the backward pass.
struct AnnTape {
  std::vector<Tensor> inputs;  // input of each layer
  std::vector<Tensor> pre;     // W x for weighted layers
  std::vector<Tensor> masks;   // dropout masks
};

/// Logits for one image. Dropout is active only when `training`.
Tensor ann_forward(const AnnNetwork& ann, const Tensor& image, bool training = false,
                   std::uint64_t dropout_seed = 0, AnnTape* tape = nullptr);

/// dL/dW per layer given dL/dlogits.
std::vector<Tensor> ann_backward(const AnnNetwork& ann, const AnnTape& tape,
                                 const Tensor& dl_dlogits);

struct AnnEval {
  double loss = 0.0;
  double accuracy = 0.0;
};

AnnEval evaluate_ann(const AnnNetwork& ann, const Dataset& data);

/// Minibatch training of the ANN. Uses the optimizer selected in cfg (SGD
/// with momentum by default for this stage); neuron fields of cfg are unused.
TrainReport train_ann(AnnNetwork& ann, const Dataset& train, const Dataset* val,
                      const TrainConfig& cfg);

/// Linear interpolation between order statistics: rank p/100 * (n-1).
double percentile(std::vector<double> values, double p);

struct LayerCalibration {
  std::size_t layer = 0;
  double threshold = 0.0;
  std::size_t samples = 0;  // recorded pre-activation values
  double min = 0.0, mean = 0.0, max = 0.0;
  bool fell_back = false;  // percentile was <= 0, threshold set to the floor
};

struct CalibrationReport {
  double percentile = 99.7;
  std::vector<LayerCalibration> layers;
  /// Ordered trace: "record:<layer>" and "assign:<layer>" entries.
  std::vector<std::string> events;
};

/// Sets each spiking layer's threshold, shallow to deep, to the p-th
/// percentile of the weighted-input sums that layer receives over all
/// timesteps of the calibration images, with the shallower layers already
/// calibrated. Leak is forced to 1 and deeper thresholds are inert while a
/// layer is recorded.
CalibrationReport calibrate_thresholds(Network& snn, const Dataset& sample, double p,
                                       double threshold_floor = 1e-3, std::uint64_t seed = 0);

/// Iso-architecture spiking network with copied weights, IF neurons and
/// calibrated thresholds.
Network convert(const AnnNetwork& ann, int timesteps, const Dataset& calib_sample, double p,
                CalibrationReport* report = nullptr, Encoding encoding = Encoding::direct,
                double threshold_floor = 1e-3, std::uint64_t seed = 0);

}  // namespace dietsnn

#endif  // DIETSNN_CONVERSION_HPP
