#ifndef DIETSNN_ENERGY_HPP
#define DIETSNN_ENERGY_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dietsnn/architecture.hpp"
#include "dietsnn/dataset.hpp"
#include "dietsnn/network.hpp"

namespace dietsnn {

/// Compute energy per operation, in picojoules (45nm figures by default).
struct EnergyModel {
  double e_mac = 4.6;  // ANN multiply-accumulate
  double e_add = 0.9;  // SNN accumulate

  void validate() const;
};

/// Operations of one conv or dense layer in the ANN:
/// conv k_w*k_h*c_in*h_out*w_out*c_out, dense f_in*f_out, otherwise 0.
std::uint64_t ops_ann(const LayerDef& layer, const Shape& in_shape, const Shape& out_shape);
std::uint64_t ops_ann(const Architecture& arch, std::size_t layer);

/// Spike-driven additions: spike_rate * ops_ann.
double ops_snn(std::uint64_t ann_ops, double spike_rate);

/// a*e_mac / (c*e_mac + (1-c)*b*e_add). Throws when the denominator is 0.
double energy_ratio(double a, double b, double c, const EnergyModel& model = {});

/// Spikes recorded over an inference pass.
struct SpikeStats {
  std::size_t samples = 0;
  int timesteps = 0;
  std::vector<std::uint64_t> total_spikes;  // per layer (0 for non-spiking)
  std::vector<std::uint64_t> neurons;       // per layer
  std::uint64_t input_spikes = 0;           // Poisson encoder output
  std::uint64_t input_neurons = 0;

  /// total_spikes / (neurons * samples)
  double spike_rate(std::size_t layer) const;
  double input_spike_rate() const;
};

struct LayerEnergy {
  std::size_t layer = 0;
  std::string kind;
  std::uint64_t ops_ann = 0;
  double input_rate = 0.0;  // spike rate of the signal arriving at the layer
  double ops_snn = 0.0;
  bool analog_input = false;  // charged at MAC cost
};

struct EnergyReport {
  std::vector<LayerEnergy> layers;
  std::vector<double> spike_rates;  // per spiking layer, in order
  double mean_spike_rate = 0.0;     // total spikes / total neurons
  double a = 1.0;                   // normalized ANN ops
  double b = 0.0;                   // normalized SNN ops of the spike-driven layers
  double c = 0.0;                   // share of ANN ops in analog-input layers
  double ratio = 0.0;               // ANN energy / SNN energy
  double ann_energy_pj = 0.0;
  double snn_energy_pj = 0.0;
};

/// Runs inference over `data` and counts spikes per layer.
SpikeStats record_spikes(const Network& net, const Dataset& data, std::uint64_t seed = 0);

/// Spike counts recomputed by summing the spike tensors of recorded tapes.
SpikeStats recount_spikes_from_tapes(const Network& net, const Dataset& data,
                                     std::uint64_t seed = 0);

/// Assembles op counts and the energy ratio. Weighted layers fed directly by
/// the analog image are charged at MAC cost; every other weighted layer is
/// charged e_add per operation scaled by the rate of its incoming spikes.
EnergyReport build_energy_report(const Network& net, const SpikeStats& stats,
                                 const EnergyModel& model = {});

void write_energy_csv(std::ostream& os, const EnergyReport& r);
/// Human-readable table: a, b, c and the energy ratio per architecture.
void write_energy_table(std::ostream& os, const EnergyReport& r, const std::string& label);

}  // namespace dietsnn

#endif  // DIETSNN_ENERGY_HPP
