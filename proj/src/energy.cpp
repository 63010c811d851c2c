#include "dietsnn/energy.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "dietsnn/bptt.hpp"
#include "dietsnn/rng.hpp"

namespace dietsnn {

void EnergyModel::validate() const {
  if (!(e_mac > 0.0) || !(e_add > 0.0)) {
    throw std::invalid_argument("energy model: e_mac and e_add must be positive");
  }
}

std::uint64_t ops_ann(const LayerDef& layer, const Shape& in_shape, const Shape& out_shape) {
  switch (layer.kind) {
    case LayerKind::conv:
      return static_cast<std::uint64_t>(layer.conv.kernel_w) * layer.conv.kernel_h *
             layer.conv.in_channels * out_shape.at(1) * out_shape.at(2) * layer.conv.out_channels;
    case LayerKind::dense:
    case LayerKind::head:
      return static_cast<std::uint64_t>(shape_numel(in_shape)) * layer.out_features;
    default:
      return 0;
  }
}

std::uint64_t ops_ann(const Architecture& arch, std::size_t layer) {
  return ops_ann(arch.layer(layer), arch.in_shape(layer), arch.out_shape(layer));
}

double ops_snn(std::uint64_t ann_ops, double spike_rate) {
  return spike_rate * static_cast<double>(ann_ops);
}

double energy_ratio(double a, double b, double c, const EnergyModel& model) {
  model.validate();
  if (a < 0.0 || b < 0.0 || c < 0.0 || c > 1.0) {
    throw std::invalid_argument("energy_ratio: need a, b >= 0 and 0 <= c <= 1");
  }
  const double denom = c * model.e_mac + (1.0 - c) * b * model.e_add;
  if (denom == 0.0) throw std::invalid_argument("energy_ratio: SNN energy is zero");
  return a * model.e_mac / denom;
}

double SpikeStats::spike_rate(std::size_t layer) const {
  if (samples == 0 || neurons.at(layer) == 0) return 0.0;
  return static_cast<double>(total_spikes.at(layer)) /
         (static_cast<double>(neurons[layer]) * static_cast<double>(samples));
}

double SpikeStats::input_spike_rate() const {
  if (samples == 0 || input_neurons == 0) return 0.0;
  return static_cast<double>(input_spikes) /
         (static_cast<double>(input_neurons) * static_cast<double>(samples));
}

namespace {

SpikeStats empty_stats(const Network& net, std::size_t samples) {
  SpikeStats s;
  s.samples = samples;
  s.timesteps = net.timesteps;
  s.total_spikes.assign(net.arch.size(), 0);
  s.neurons.assign(net.arch.size(), 0);
  for (std::size_t l : net.spiking_layers()) s.neurons[l] = shape_numel(net.arch.out_shape(l));
  s.input_neurons = shape_numel(net.arch.input_shape());
  return s;
}

}  // namespace

SpikeStats record_spikes(const Network& net, const Dataset& data, std::uint64_t seed) {
  if (data.size() == 0) throw std::invalid_argument("record_spikes: empty dataset");
  const EvalResult e = evaluate(net, data, seed);
  SpikeStats s = empty_stats(net, data.size());
  for (std::size_t l : net.spiking_layers()) s.total_spikes[l] = e.spike_counts[l];
  s.input_spikes = e.input_spikes;
  return s;
}

SpikeStats recount_spikes_from_tapes(const Network& net, const Dataset& data, std::uint64_t seed) {
  if (data.size() == 0) throw std::invalid_argument("recount_spikes_from_tapes: empty dataset");
  SpikeStats s = empty_stats(net, data.size());
  ForwardOptions fo;
  fo.record = true;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ForwardResult r = forward(net, data.image(i), derive_seed(seed, Stream::poisson, {i}), fo);
    for (std::size_t l : net.spiking_layers()) {
      for (const TapeStep& step : r.tape->steps[l]) {
        double sum = 0.0;
        for (double o : step.spikes.values()) sum += o;
        s.total_spikes[l] += static_cast<std::uint64_t>(std::llround(sum));
      }
    }
    if (net.encoding == Encoding::poisson) {
      for (const TapeStep& step : r.tape->steps[0]) {
        double sum = 0.0;
        for (double o : step.input.values()) sum += o;
        s.input_spikes += static_cast<std::uint64_t>(std::llround(sum));
      }
    }
  }
  return s;
}

EnergyReport build_energy_report(const Network& net, const SpikeStats& stats,
                                 const EnergyModel& model) {
  model.validate();
  const Architecture& arch = net.arch;
  EnergyReport r;

  // Rate of the signal entering each layer: the input encoder for the first
  // spiking layer, afterwards the most recent spiking layer upstream.
  bool analog = net.encoding == Encoding::direct;
  double rate = analog ? 1.0 : stats.input_spike_rate();
  std::uint64_t total_ann = 0, analog_ops = 0;
  double spike_driven_ann = 0.0, spike_driven_snn = 0.0;
  std::uint64_t all_spikes = 0, all_neurons = 0;

  for (std::size_t l = 0; l < arch.size(); ++l) {
    const LayerDef& def = arch.layer(l);
    if (def.has_weights()) {
      LayerEnergy le;
      le.layer = l;
      le.kind = layer_kind_name(def.kind);
      le.ops_ann = ops_ann(arch, l);
      le.analog_input = analog;
      le.input_rate = analog ? 0.0 : rate;
      le.ops_snn = analog ? static_cast<double>(le.ops_ann) : ops_snn(le.ops_ann, rate);
      total_ann += le.ops_ann;
      if (analog) {
        analog_ops += le.ops_ann;
      } else {
        spike_driven_ann += static_cast<double>(le.ops_ann);
        spike_driven_snn += le.ops_snn;
      }
      r.layers.push_back(le);
    }
    if (def.is_spiking()) {
      analog = false;
      rate = stats.spike_rate(l);
      r.spike_rates.push_back(rate);
      all_spikes += stats.total_spikes[l];
      all_neurons += stats.neurons[l];
    }
  }
  if (total_ann == 0) throw std::invalid_argument("build_energy_report: network has no operations");

  r.mean_spike_rate = (all_neurons && stats.samples)
                          ? static_cast<double>(all_spikes) /
                                (static_cast<double>(all_neurons) * static_cast<double>(stats.samples))
                          : 0.0;
  r.a = 1.0;
  r.c = static_cast<double>(analog_ops) / static_cast<double>(total_ann);
  r.b = spike_driven_ann > 0.0 ? spike_driven_snn / spike_driven_ann : 0.0;
  r.ann_energy_pj = static_cast<double>(total_ann) * model.e_mac;
  r.snn_energy_pj = static_cast<double>(analog_ops) * model.e_mac + spike_driven_snn * model.e_add;
  const double denom = r.c * model.e_mac + (1.0 - r.c) * r.b * model.e_add;
  r.ratio = denom > 0.0 ? energy_ratio(r.a, r.b, r.c, model)
                        : std::numeric_limits<double>::infinity();
  return r;
}

void write_energy_csv(std::ostream& os, const EnergyReport& r) {
  char buf[256];
  os << "layer,kind,ops_ann,input_spike_rate,ops_snn,analog_input\n";
  for (const LayerEnergy& le : r.layers) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%llu,%.6f,%.3f,%d\n", le.layer, le.kind.c_str(),
                  static_cast<unsigned long long>(le.ops_ann), le.input_rate, le.ops_snn,
                  le.analog_input ? 1 : 0);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "total,a=%.6f,b=%.6f,c=%.6f,ratio=%.6f,mean_spike_rate=%.6f\n",
                r.a, r.b, r.c, r.ratio, r.mean_spike_rate);
  os << buf;
}

void write_energy_table(std::ostream& os, const EnergyReport& r, const std::string& label) {
  char buf[256];
  os << "Architecture          | Normalized #OP_ANN (a) | Normalized #OP_SNN (b) | "
        "#OP layer 1 / Total #OP (c) | ANN / SNN energy\n";
  std::snprintf(buf, sizeof buf, "%-21s | %22.2f | %22.2f | %27.3f | %16.1f\n", label.c_str(), r.a,
                r.b, r.c, r.ratio);
  os << buf;
}

}  // namespace dietsnn
