#include "dietsnn/conversion.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "dietsnn/kernels.hpp"
#include "dietsnn/rng.hpp"

namespace dietsnn {

AnnNetwork AnnNetwork::create(Architecture arch, std::uint64_t seed) {
  AnnNetwork ann;
  ann.weights = init_weights(arch, seed);
  ann.arch = std::move(arch);
  return ann;
}

void AnnNetwork::validate() const {
  if (weights.size() != arch.size()) {
    throw std::invalid_argument("ann: weight list does not match the layer count");
  }
  for (std::size_t i = 0; i < arch.size(); ++i) {
    if (arch.layer(i).has_weights() && weights[i].shape() != arch.weight_shape(i)) {
      throw ShapeError("ann: layer " + std::to_string(i) + " weights are " +
                       shape_str(weights[i].shape()) + ", expected " +
                       shape_str(arch.weight_shape(i)));
    }
  }
}

Tensor ann_forward(const AnnNetwork& ann, const Tensor& image, bool training,
                   std::uint64_t dropout_seed, AnnTape* tape) {
  const Architecture& arch = ann.arch;
  if (image.shape() != arch.input_shape()) {
    throw ShapeError("ann_forward: image shape " + shape_str(image.shape()) +
                     " does not match network input " + shape_str(arch.input_shape()));
  }
  if (tape) {
    tape->inputs.assign(arch.size(), Tensor());
    tape->pre.assign(arch.size(), Tensor());
    tape->masks.assign(arch.size(), Tensor());
  }
  Rng rng(dropout_seed);
  Tensor x = image;
  for (std::size_t l = 0; l < arch.size(); ++l) {
    const LayerDef& def = arch.layer(l);
    if (tape) tape->inputs[l] = x;
    switch (def.kind) {
      case LayerKind::conv:
      case LayerKind::dense: {
        Tensor pre = def.kind == LayerKind::conv
                         ? kernels::conv2d_forward(x, ann.weights[l], def.conv)
                         : kernels::dense_forward(x, ann.weights[l]);
        x = kernels::relu_forward(pre);
        if (tape) tape->pre[l] = std::move(pre);
        break;
      }
      case LayerKind::avgpool:
        x = kernels::avg_pool2d_forward(x, def.pool);
        break;
      case LayerKind::dropout:
        if (training && def.drop_p > 0.0) {
          Tensor mask(x.shape());
          const double keep = 1.0 / (1.0 - def.drop_p);
          for (double& m : mask.values()) m = rng.uniform() < def.drop_p ? 0.0 : keep;
          x = kernels::mul(x, mask);
          if (tape) tape->masks[l] = std::move(mask);
        }
        break;
      case LayerKind::head:
        x = kernels::dense_forward(x, ann.weights[l]);
        break;
    }
  }
  return x;
}

std::vector<Tensor> ann_backward(const AnnNetwork& ann, const AnnTape& tape,
                                 const Tensor& dl_dlogits) {
  const Architecture& arch = ann.arch;
  std::vector<Tensor> grads(arch.size());
  Tensor g = dl_dlogits;
  for (std::size_t l = arch.size(); l-- > 0;) {
    const LayerDef& def = arch.layer(l);
    switch (def.kind) {
      case LayerKind::head: {
        DenseGrads d = kernels::dense_backward(g, tape.inputs[l], ann.weights[l]);
        grads[l] = std::move(d.grad_weights);
        g = std::move(d.grad_input);
        break;
      }
      case LayerKind::dense: {
        const Tensor gp = kernels::relu_backward(g, tape.pre[l]);
        DenseGrads d = kernels::dense_backward(gp, tape.inputs[l], ann.weights[l]);
        grads[l] = std::move(d.grad_weights);
        g = std::move(d.grad_input);
        break;
      }
      case LayerKind::conv: {
        const Tensor gp = kernels::relu_backward(g, tape.pre[l]);
        grads[l] = kernels::conv2d_backward_weights(gp, tape.inputs[l], def.conv);
        if (l > 0) g = kernels::conv2d_backward_input(gp, ann.weights[l], arch.in_shape(l), def.conv);
        break;
      }
      case LayerKind::avgpool:
        g = kernels::avg_pool2d_backward(g, arch.in_shape(l), def.pool);
        break;
      case LayerKind::dropout:
        if (!tape.masks[l].empty()) g = kernels::mul(g, tape.masks[l]);
        break;
    }
  }
  return grads;
}

AnnEval evaluate_ann(const AnnNetwork& ann, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("evaluate_ann: empty dataset");
  const auto n = static_cast<std::int64_t>(data.size());
  std::vector<double> losses(data.size());
  std::vector<char> correct(data.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Tensor logits = ann_forward(ann, data.image(ui));
    losses[ui] = softmax_cross_entropy(logits, data.labels[ui]).loss;
    correct[ui] = argmax(logits) == data.labels[ui];
  }
  AnnEval e;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    e.loss += losses[i];
    hits += correct[i] ? 1 : 0;
  }
  e.loss /= static_cast<double>(data.size());
  e.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  return e;
}

TrainReport train_ann(AnnNetwork& ann, const Dataset& train, const Dataset* val,
                      const TrainConfig& cfg) {
  if (train.size() == 0) throw std::invalid_argument("train_ann: empty dataset");
  cfg.validate();
  ann.validate();
  OptimizerState opt(cfg);
  TrainReport report;
  const std::size_t n_layers = ann.arch.size();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.lr_decay_every > 0 && epoch > 1 && (epoch - 1) % cfg.lr_decay_every == 0) {
      opt.lr *= cfg.lr_decay;
    }
    const auto order = epoch_order(train.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t bsz = std::min(cfg.batch_size, order.size() - start);
      std::vector<std::vector<Tensor>> sample_grads(bsz);
      std::vector<double> losses(bsz);
      std::vector<char> correct(bsz);
      const AnnNetwork& frozen = ann;
#pragma omp parallel for schedule(dynamic)
      for (std::int64_t b = 0; b < static_cast<std::int64_t>(bsz); ++b) {
        const auto ub = static_cast<std::size_t>(b);
        const std::size_t idx = order[start + ub];
        AnnTape tape;
        const Tensor logits = ann_forward(
            frozen, train.image(idx), true,
            derive_seed(cfg.seed, Stream::dropout,
                        {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx)}),
            &tape);
        LossResult lr = softmax_cross_entropy(logits, train.labels[idx]);
        losses[ub] = lr.loss;
        correct[ub] = argmax(logits) == train.labels[idx];
        sample_grads[ub] = ann_backward(frozen, tape, lr.grad);
      }
      std::vector<Tensor> total = std::move(sample_grads[0]);
      for (std::size_t b = 1; b < bsz; ++b) {
        for (std::size_t l = 0; l < n_layers; ++l) {
          if (!total[l].empty()) kernels::add_inplace(total[l], sample_grads[b][l]);
        }
      }
      bool finite = true;
      for (std::size_t l = 0; l < n_layers; ++l) {
        for (double& v : total[l].values()) v /= static_cast<double>(bsz);
        finite = finite && total[l].all_finite();
      }
      for (std::size_t b = 0; b < bsz; ++b) {
        loss_sum += losses[b];
        hits += correct[b] ? 1 : 0;
      }
      if (!finite) {
        ++opt.skipped_batches;
        std::cerr << "warning: non-finite ANN gradient, skipping update\n";
        continue;
      }
      opt.begin_step();
      for (std::size_t l = 0; l < n_layers; ++l) {
        if (!total[l].empty()) opt.update(l, ann.weights[l].values(), total[l].values());
      }
    }
    report.metrics.push_back({epoch, "train", loss_sum / static_cast<double>(train.size()),
                              static_cast<double>(hits) / static_cast<double>(train.size()),
                              {}});
    if (val != nullptr && val->size() > 0) {
      const AnnEval ev = evaluate_ann(ann, *val);
      report.metrics.push_back({epoch, "val", ev.loss, ev.accuracy, {}});
    }
  }
  report.skipped_batches = opt.skipped_batches;
  return report;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile: no values");
  if (!(p > 0.0 && p <= 100.0)) {
    throw std::invalid_argument("percentile: p must be in (0, 100], got " + std::to_string(p));
  }
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

CalibrationReport calibrate_thresholds(Network& snn, const Dataset& sample, double p,
                                       double threshold_floor, std::uint64_t seed) {
  if (sample.size() == 0) throw std::invalid_argument("calibrate_thresholds: empty calibration sample");
  if (!(p > 0.0 && p <= 100.0)) {
    throw std::invalid_argument("calibrate_thresholds: percentile must be in (0, 100]");
  }
  CalibrationReport report;
  report.percentile = p;
  const auto spiking = snn.spiking_layers();
  // Leak is unity during calibration; uncalibrated layers never fire.
  for (std::size_t l : spiking) {
    snn.neurons[l].leak = 1.0;
    snn.neurons[l].threshold = std::numeric_limits<double>::max();
  }

  for (std::size_t layer : spiking) {
    const auto n = static_cast<std::int64_t>(sample.size());
    std::vector<std::vector<double>> per_sample(sample.size());
    const Network& frozen = snn;
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      ForwardOptions fo;
      fo.record = true;
      fo.stop_after_layer = layer;
      ForwardResult r = forward(frozen, sample.image(ui), derive_seed(seed, Stream::poisson, {ui}), fo);
      auto& out = per_sample[ui];
      for (const TapeStep& s : r.tape->steps[layer]) {
        out.insert(out.end(), s.weighted_input.values().begin(), s.weighted_input.values().end());
      }
    }
    report.events.push_back("record:" + std::to_string(layer));
    std::vector<double> reservoir;
    for (auto& v : per_sample) reservoir.insert(reservoir.end(), v.begin(), v.end());

    LayerCalibration cal;
    cal.layer = layer;
    cal.samples = reservoir.size();
    cal.min = *std::min_element(reservoir.begin(), reservoir.end());
    cal.max = *std::max_element(reservoir.begin(), reservoir.end());
    double sum = 0.0;
    for (double v : reservoir) sum += v;
    cal.mean = sum / static_cast<double>(reservoir.size());
    double thr = percentile(std::move(reservoir), p);
    if (!(thr > 0.0)) {
      std::cerr << "warning: layer " << layer << " pre-activation percentile is " << thr
                << "; threshold falls back to " << threshold_floor << '\n';
      thr = threshold_floor;
      cal.fell_back = true;
    }
    thr = std::max(thr, threshold_floor);
    cal.threshold = thr;
    snn.neurons[layer].threshold = thr;
    report.events.push_back("assign:" + std::to_string(layer));
    report.layers.push_back(cal);
  }
  return report;
}

Network convert(const AnnNetwork& ann, int timesteps, const Dataset& calib_sample, double p,
                CalibrationReport* report, Encoding encoding, double threshold_floor,
                std::uint64_t seed) {
  ann.validate();
  Network snn = Network::create(ann.arch, ann.weights, timesteps, encoding);
  CalibrationReport r = calibrate_thresholds(snn, calib_sample, p, threshold_floor, seed);
  if (report) *report = std::move(r);
  return snn;
}

}  // namespace dietsnn
