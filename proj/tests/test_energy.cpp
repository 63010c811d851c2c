#include <gtest/gtest.h>

#include <sstream>

#include "dietsnn/energy.hpp"
#include "dietsnn/rng.hpp"

using namespace dietsnn;

namespace {

std::uint64_t naive_macs(const Architecture& arch, std::size_t l) {
  const LayerDef& d = arch.layer(l);
  std::uint64_t n = 0;
  if (d.kind == LayerKind::conv) {
    const Shape& o = arch.out_shape(l);
    for (std::size_t co = 0; co < o[0]; ++co)
      for (std::size_t y = 0; y < o[1]; ++y)
        for (std::size_t x = 0; x < o[2]; ++x)
          for (std::size_t ci = 0; ci < d.conv.in_channels; ++ci)
            for (std::size_t k = 0; k < d.conv.kernel_h * d.conv.kernel_w; ++k) ++n;
  } else if (d.kind == LayerKind::dense || d.kind == LayerKind::head) {
    for (std::size_t j = 0; j < d.out_features; ++j)
      for (std::size_t i = 0; i < shape_numel(arch.in_shape(l)); ++i) ++n;
  }
  return n;
}

}  // namespace

TEST(Energy, ReferenceRatios) {
  const struct {
    double b, c, want;
  } rows[] = {{0.14, 0.029, 18.0}, {0.39, 0.005, 12.4}, {0.40, 0.005, 12.1},
              {0.41, 0.006, 11.7}, {0.76, 0.013, 6.3},  {0.72, 0.013, 6.6}};
  for (const auto& r : rows) EXPECT_NEAR(energy_ratio(1.0, r.b, r.c), r.want, 0.1) << r.b << "," << r.c;
  EXPECT_NEAR(energy_ratio(1.0, 0.39, 0.005), 12.36, 0.01);
}

TEST(Energy, BreakEvenAndZeroDenominator) {
  const EnergyModel m;
  EXPECT_NEAR(energy_ratio(1.0, m.e_mac / m.e_add, 0.0, m), 1.0, 1e-15);
  EXPECT_THROW(energy_ratio(1.0, 0.0, 0.0, m), std::invalid_argument);
  EXPECT_THROW((EnergyModel{-1.0, 0.9}.validate()), std::invalid_argument);
}

TEST(Energy, OpCounts) {
  const Architecture a = Architecture::parse("input:2:4:4 conv:8:3:1:1 head:10");
  EXPECT_EQ(ops_ann(a, 0), 2304u);
  const Architecture d = Architecture::parse("input:1:10:10 head:10");
  EXPECT_EQ(ops_ann(d, 0), 1000u);
  const Architecture one = Architecture::parse("input:1:1:1 conv:1:1:1:0 avgpool:1 head:1");
  EXPECT_EQ(ops_ann(one, 0), 1u);
  EXPECT_EQ(ops_ann(one, 1), 0u);
  EXPECT_EQ(ops_snn(2304, 1.0), 2304.0);
  EXPECT_EQ(ops_snn(2304, 0.0), 0.0);
  EXPECT_EQ(ops_snn(100, 5.0), 500.0);
}

TEST(Energy, OpCountsMatchNaiveCounterOnRandomSpecs) {
  Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t side = 4 + 2 * rng.below(4);
    std::string text = "input:" + std::to_string(1 + rng.below(3)) + ":" + std::to_string(side) + ":" +
                       std::to_string(side) + " conv:" + std::to_string(1 + rng.below(6)) + ":" +
                       std::to_string(1 + 2 * rng.below(2)) + ":1:" + std::to_string(rng.below(2)) +
                       " dense:" + std::to_string(1 + rng.below(20)) + " head:" + std::to_string(2 + rng.below(5));
    const Architecture a = Architecture::parse(text);
    for (std::size_t l = 0; l < a.size(); ++l) EXPECT_EQ(ops_ann(a, l), naive_macs(a, l)) << text;
  }
}

TEST(Energy, ZeroWeightsGiveZeroSpikes) {
  const Dataset data = synth_dataset(SynthTask::two_class_blobs, 20, 1);
  const Architecture arch = make_preset("tiny", data.image_shape(), 2);
  std::vector<Tensor> w = init_weights(arch, 1);
  for (Tensor& t : w) t.fill(0.0);
  const Network net = Network::create(arch, w, 5);
  const SpikeStats s = record_spikes(net, data);
  for (std::size_t l : net.spiking_layers()) EXPECT_EQ(s.spike_rate(l), 0.0);
  const EnergyReport r = build_energy_report(net, s);
  EXPECT_EQ(r.b, 0.0);
  EXPECT_NEAR(r.ratio, 1.0 / r.c, 1e-12 / r.c);
}

TEST(Energy, RecountAndBookkeeping) {
  const Dataset data = synth_dataset(SynthTask::striped_digits, 30, 2);
  const Architecture arch = make_preset("vgg6-mini", data.image_shape(), 4, 0.1);
  Network net = Network::create(arch, init_weights(arch, 5), 6);
  for (std::size_t l : net.spiking_layers()) net.neurons[l] = {0.9, 0.5};
  for (Encoding e : {Encoding::direct, Encoding::poisson}) {
    net.encoding = e;
    const SpikeStats a = record_spikes(net, data, 3);
    const SpikeStats b = recount_spikes_from_tapes(net, data, 3);
    const SpikeStats c = record_spikes(net, data, 3);
    EXPECT_EQ(a.total_spikes, b.total_spikes);
    EXPECT_EQ(a.total_spikes, c.total_spikes);
    EXPECT_EQ(a.input_spikes, b.input_spikes);
    std::uint64_t any = 0;
    for (std::size_t l : net.spiking_layers()) {
      any += a.total_spikes[l];
      const double back = a.spike_rate(l) * double(a.neurons[l]) * double(a.samples);
      EXPECT_EQ(static_cast<std::uint64_t>(std::llround(back)), a.total_spikes[l]);
    }
    EXPECT_GT(any, 0u);
  }
}

TEST(Energy, ReportUsesIncomingRates) {
  const Dataset data = synth_dataset(SynthTask::two_class_blobs, 20, 6);
  const Architecture arch = Architecture::parse("input:1:8:8 conv:4:3:1:1 avgpool:2 dense:8 head:2");
  Network net = Network::create(arch, init_weights(arch, 2), 5);
  for (std::size_t l : net.spiking_layers()) net.neurons[l].threshold = 0.3;
  const SpikeStats s = record_spikes(net, data);
  const EnergyReport r = build_energy_report(net, s);
  ASSERT_EQ(r.layers.size(), 3u);
  EXPECT_TRUE(r.layers[0].analog_input);
  EXPECT_EQ(r.layers[1].input_rate, s.spike_rate(0));  // dense fed by pooled conv spikes
  EXPECT_EQ(r.layers[2].input_rate, s.spike_rate(2));
  const double total = double(ops_ann(arch, 0) + ops_ann(arch, 2) + ops_ann(arch, 3));
  EXPECT_NEAR(r.c, double(ops_ann(arch, 0)) / total, 1e-15);
  EXPECT_NEAR(r.ratio, r.ann_energy_pj / r.snn_energy_pj, 1e-9 * r.ratio);
  EXPECT_NEAR(r.ratio, energy_ratio(r.a, r.b, r.c), 1e-12);

  std::ostringstream csv, table;
  write_energy_csv(csv, r);
  write_energy_table(table, r, "toy");
  EXPECT_NE(csv.str().find("ratio="), std::string::npos);
  EXPECT_NE(table.str().find("ANN / SNN energy"), std::string::npos);
}
