// Serial reference kernels against the OpenMP ones, plus a full SNN forward.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "dietsnn/dataset.hpp"
#include "dietsnn/kernels.hpp"
#include "dietsnn/network.hpp"
#include "dietsnn/rng.hpp"

using namespace dietsnn;

namespace {

Tensor random_tensor(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(s);
  for (double& v : t.values()) v = rng.uniform(-1, 1);
  return t;
}

ConvSpec conv_spec(std::size_t channels) { return {3, 3, channels, channels, 1, 1}; }

template <Tensor (*Conv)(const Tensor&, const Tensor&, const ConvSpec&)>
void BM_Conv(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const ConvSpec spec = conv_spec(c);
  const Tensor x = random_tensor({c, 32, 32}, 1), w = random_tensor(spec.weight_shape(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(Conv(x, w, spec));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(c * c * 9 * 32 * 32));
}

template <Tensor (*Dense)(const Tensor&, const Tensor&)>
void BM_Dense(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({n}, 3), w = random_tensor({n, n}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(Dense(x, w));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n));
}

void BM_ForwardBatch(benchmark::State& state) {
  const Dataset data = synth_dataset(SynthTask::striped_digits, 64, 5);
  const Architecture arch = make_preset("vgg6-mini", data.image_shape(), 4);
  Network net = Network::create(arch, init_weights(arch, 6), static_cast<int>(state.range(0)));
  for (std::size_t l : net.spiking_layers()) net.neurons[l].threshold = 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(net, data.images, 7));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(data.size()));
}

}  // namespace

BENCHMARK(BM_Conv<reference::conv2d_forward>)->Name("conv2d/reference")->Arg(16)->Arg(64);
BENCHMARK(BM_Conv<kernels::conv2d_forward>)->Name("conv2d/openmp")->Arg(16)->Arg(64)->UseRealTime();
BENCHMARK(BM_Dense<reference::dense_forward>)->Name("dense/reference")->Arg(512)->Arg(2048);
BENCHMARK(BM_Dense<kernels::dense_forward>)->Name("dense/openmp")->Arg(512)->Arg(2048)->UseRealTime();
BENCHMARK(BM_ForwardBatch)->Name("snn_forward/vgg6-mini")->Arg(5)->Arg(20)->UseRealTime();

BENCHMARK_MAIN();
