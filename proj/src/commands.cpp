#include "dietsnn/commands.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "dietsnn/rng.hpp"

namespace dietsnn {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void prepare_out_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw ConfigError("run.out_dir", "cannot create '" + cfg.out_dir.string() + "': " + ec.message());
}

std::uint64_t eval_seed(const ExperimentConfig& cfg) {
  return derive_seed(cfg.seed, Stream::poisson, {0xe7a1});
}

std::string mean_rate_str(const std::vector<double>& rates) {
  std::string s;
  for (std::size_t i = 0; i < rates.size(); ++i) s += (i ? " " : "") + fmt("%.4f", rates[i]);
  return s;
}

}  // namespace

Datasets load_datasets(const ExperimentConfig& cfg) {
  const DataConfig& d = cfg.data;
  Datasets out;
  if (d.kind == "synth") {
    const SynthTask task = parse_synth_task(d.task);
    out.train = synth_dataset(task, d.train_count, derive_seed(cfg.seed, Stream::data, {0}));
    out.test = synth_dataset(task, std::max<std::size_t>(d.test_count, 2),
                             derive_seed(cfg.seed, Stream::data, {1}));
    return out;
  }
  if (d.kind == "idx") {
    out.train = load_idx(d.train_images, d.train_labels, d.norm, d.classes);
    out.test = d.test_images.empty() ? out.train
                                     : load_idx(d.test_images, d.test_labels, d.norm, d.classes);
  } else {
    out.train = load_cifar_binary(d.train_file, d.norm, d.label_bytes, d.classes);
    out.test = d.test_file.empty() ? out.train
                                   : load_cifar_binary(d.test_file, d.norm, d.label_bytes, d.classes);
  }
  if (d.train_count > 0) out.train = out.train.head(d.train_count);
  if (d.test_count > 0) out.test = out.test.head(d.test_count);
  return out;
}

Architecture build_architecture(const ExperimentConfig& cfg, const Dataset& data) {
  const Shape in = data.image_shape();
  try {
    if (!cfg.layers.empty()) {
      return Architecture::parse("input:" + std::to_string(in[0]) + ":" + std::to_string(in[1]) +
                                 ":" + std::to_string(in[2]) + " " + cfg.layers);
    }
    return make_preset(cfg.preset, in, data.classes, cfg.dropout);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.layers.empty() ? "model.preset" : "model.layers", e.what());
  }
}

void write_metrics_csv(std::ostream& os, const TrainReport& report) {
  std::size_t rate_cols = 0;
  for (const EpochMetrics& m : report.metrics) rate_cols = std::max(rate_cols, m.spike_rates.size());
  os << "epoch,split,loss,accuracy";
  for (std::size_t i = 0; i < rate_cols; ++i) os << ",spike_rate_" << i;
  os << "\n";
  char buf[128];
  for (const EpochMetrics& m : report.metrics) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.8f,%.6f", m.epoch, m.split.c_str(), m.loss, m.accuracy);
    os << buf;
    for (std::size_t i = 0; i < rate_cols; ++i) {
      os << "," << (i < m.spike_rates.size() ? fmt("%.6f", m.spike_rates[i]) : "");
    }
    os << "\n";
  }
}

void write_calibration_csv(std::ostream& os, const CalibrationReport& report) {
  char buf[256];
  os << "layer,percentile,threshold,samples,min,mean,max,fell_back\n";
  for (const LayerCalibration& c : report.layers) {
    std::snprintf(buf, sizeof buf, "%zu,%.4f,%.17g,%zu,%.17g,%.17g,%.17g,%d\n", c.layer,
                  report.percentile, c.threshold, c.samples, c.min, c.mean, c.max,
                  c.fell_back ? 1 : 0);
    os << buf;
  }
}

AnnEval run_train_ann(const ExperimentConfig& cfg, std::ostream& log) {
  const Datasets data = load_datasets(cfg);
  const Architecture arch = build_architecture(cfg, data.train);
  prepare_out_dir(cfg);
  AnnNetwork ann = AnnNetwork::create(arch, derive_seed(cfg.seed, Stream::init, {0}));
  const TrainReport report = train_ann(ann, data.train, &data.test, cfg.ann);
  std::ostringstream csv;
  write_metrics_csv(csv, report);
  write_text_atomic(cfg.out_dir / "ann_metrics.csv", csv.str());
  save_checkpoint(ann, cfg.out_dir / "ann.ckpt");
  const AnnEval ev = evaluate_ann(ann, data.test);
  log << "ann: " << arch.parameter_count() << " parameters, test accuracy "
      << fmt("%.2f", 100.0 * ev.accuracy) << "%\n";
  return ev;
}

CalibrationReport run_convert(const ExperimentConfig& cfg, const std::filesystem::path& ann_ckpt,
                              std::ostream& log) {
  const Datasets data = load_datasets(cfg);
  const Architecture arch = build_architecture(cfg, data.train);
  const AnnNetwork ann = ann_from_checkpoint(read_checkpoint(ann_ckpt), &arch);
  prepare_out_dir(cfg);
  CalibrationReport report;
  const Network snn = convert(ann, cfg.timesteps, data.train.head(cfg.calib_count), cfg.percentile,
                              &report, cfg.encoding, cfg.snn.threshold_floor,
                              derive_seed(cfg.seed, Stream::poisson, {0xca1b}));
  std::ostringstream csv;
  write_calibration_csv(csv, report);
  write_text_atomic(cfg.out_dir / "calibration.csv", csv.str());
  save_checkpoint(snn, Stage::converted, cfg.out_dir / "converted.ckpt");
  for (const LayerCalibration& c : report.layers) {
    log << "layer " << c.layer << ": threshold " << fmt("%.6g", c.threshold)
        << (c.fell_back ? " (floor)" : "") << "\n";
  }
  return report;
}

TrainReport run_finetune(const ExperimentConfig& cfg, const std::filesystem::path& converted_ckpt,
                         std::ostream& log) {
  const Datasets data = load_datasets(cfg);
  const Architecture arch = build_architecture(cfg, data.train);
  Network net = network_from_checkpoint(read_checkpoint(converted_ckpt), &arch);
  net.timesteps = cfg.timesteps;
  net.encoding = cfg.encoding;
  prepare_out_dir(cfg);
  const TrainReport report = train_epochs(net, data.train, &data.test, cfg.snn);
  std::ostringstream csv;
  write_metrics_csv(csv, report);
  write_text_atomic(cfg.out_dir / "finetune_metrics.csv", csv.str());
  save_checkpoint(net, Stage::diet, cfg.out_dir / "diet.ckpt");
  if (!report.metrics.empty()) {
    const EpochMetrics& last = report.metrics.back();
    log << "finetune: T=" << net.timesteps << " " << last.split << " accuracy "
        << fmt("%.2f", 100.0 * last.accuracy) << "%, spike rates " << mean_rate_str(last.spike_rates)
        << "\n";
  }
  if (report.skipped_batches) log << "finetune: skipped " << report.skipped_batches << " batches\n";
  return report;
}

EvalSummary run_eval(const ExperimentConfig& cfg, const std::filesystem::path& ckpt,
                     std::ostream& log) {
  const Datasets data = load_datasets(cfg);
  const Architecture arch = build_architecture(cfg, data.train);
  const Checkpoint c = read_checkpoint(ckpt);
  EvalSummary s;
  s.stage = c.stage;
  if (c.stage == Stage::ann) {
    const AnnEval ev = evaluate_ann(ann_from_checkpoint(c, &arch), data.test);
    s.accuracy = ev.accuracy;
    s.loss = ev.loss;
  } else {
    const Network net = network_from_checkpoint(c, &arch);
    const EvalResult ev = evaluate(net, data.test, eval_seed(cfg));
    s.accuracy = ev.accuracy;
    s.loss = ev.loss;
    s.spike_rates = ev.spike_rates(net);
  }
  prepare_out_dir(cfg);
  std::ostringstream csv;
  csv << "stage,samples,loss,accuracy";
  for (std::size_t i = 0; i < s.spike_rates.size(); ++i) csv << ",spike_rate_" << i;
  csv << "\n" << stage_name(s.stage) << "," << data.test.size() << "," << fmt("%.8f", s.loss) << ","
      << fmt("%.6f", s.accuracy);
  for (double r : s.spike_rates) csv << "," << fmt("%.6f", r);
  csv << "\n";
  write_text_atomic(cfg.out_dir / "eval.csv", csv.str());
  log << stage_name(s.stage) << ": accuracy " << fmt("%.2f", 100.0 * s.accuracy) << "%";
  if (!s.spike_rates.empty()) log << ", spike rates " << mean_rate_str(s.spike_rates);
  log << "\n";
  return s;
}

EnergyReport run_energy(const ExperimentConfig& cfg, const std::filesystem::path& ckpt,
                        std::ostream& log) {
  const Datasets data = load_datasets(cfg);
  const Architecture arch = build_architecture(cfg, data.train);
  const Network net = network_from_checkpoint(read_checkpoint(ckpt), &arch);
  const SpikeStats stats = record_spikes(net, data.test, eval_seed(cfg));
  const EnergyReport r = build_energy_report(net, stats, cfg.energy);
  prepare_out_dir(cfg);
  std::ostringstream csv, table;
  write_energy_csv(csv, r);
  write_energy_table(table, r, cfg.layers.empty() ? cfg.preset : "custom");
  write_text_atomic(cfg.out_dir / "energy.csv", csv.str());
  write_text_atomic(cfg.out_dir / "energy.txt", table.str());
  log << table.str();
  return r;
}

double energy_ratio_from_stats(const std::filesystem::path& stats, const EnergyModel& model) {
  std::ifstream in(stats);
  if (!in) throw std::runtime_error("cannot open stats file '" + stats.string() + "'");
  std::map<std::string, double> v{{"a", 1.0}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      const auto eq = tok.find('=');
      const std::string key = tok.substr(0, eq);
      if (eq == std::string::npos || (key != "a" && key != "b" && key != "c")) {
        throw std::invalid_argument("stats line " + std::to_string(lineno) +
                                    ": expected a=, b= or c=, got '" + tok + "'");
      }
      try {
        v[key] = std::stod(tok.substr(eq + 1));
      } catch (const std::exception&) {
        throw std::invalid_argument("stats: " + key + " is not a number");
      }
    }
  }
  if (!v.count("b") || !v.count("c")) throw std::invalid_argument("stats: b and c are required");
  return energy_ratio(v["a"], v["b"], v["c"], model);
}

AblationResult run_ablate(const ExperimentConfig& cfg, std::ostream& log) {
  const Datasets data = load_datasets(cfg);
  const Architecture arch = build_architecture(cfg, data.train);
  prepare_out_dir(cfg);

  AnnNetwork ann = AnnNetwork::create(arch, derive_seed(cfg.seed, Stream::init, {0}));
  train_ann(ann, data.train, nullptr, cfg.ann);
  AblationResult res;
  res.ann_accuracy = evaluate_ann(ann, data.test).accuracy;
  res.target = res.ann_accuracy - cfg.ablate.tolerance / 100.0;
  log << "ablate: ann accuracy " << fmt("%.2f", 100.0 * res.ann_accuracy) << "%, target "
      << fmt("%.2f", 100.0 * res.target) << "%\n";

  res.variants = {
      {'a', "IF + Poisson", Encoding::poisson, false, false},
      {'b', "IF + direct", Encoding::direct, false, false},
      {'c', "direct + threshold", Encoding::direct, true, false},
      {'d', "direct + threshold + leak", Encoding::direct, true, true},
  };
  const Dataset calib = data.train.head(cfg.calib_count);
  for (AblationVariant& v : res.variants) {
    TrainConfig tc = cfg.snn;
    tc.epochs = cfg.ablate.epochs;
    tc.train_threshold = v.train_threshold;
    tc.train_leak = v.train_leak;
    for (int t : cfg.ablate.timesteps) {
      const std::uint64_t key = static_cast<std::uint64_t>(t);
      Network net = convert(ann, t, calib, cfg.percentile, nullptr, v.encoding,
                            tc.threshold_floor, derive_seed(cfg.seed, Stream::poisson, {0xca1b, key}));
      tc.seed = derive_seed(cfg.snn.seed, Stream::shuffle, {key});
      train_epochs(net, data.train, nullptr, tc);
      const SpikeStats stats = record_spikes(net, data.test, eval_seed(cfg));
      const EnergyReport er = build_energy_report(net, stats, cfg.energy);
      AblationTrial trial{v.variant, t, 0.0, er.mean_spike_rate, er.ratio, false};
      std::uint64_t correct = 0;
      {
        const EvalResult ev = evaluate(net, data.test, eval_seed(cfg));
        trial.accuracy = ev.accuracy;
        correct = static_cast<std::uint64_t>(ev.accuracy * static_cast<double>(data.test.size()) + 0.5);
      }
      trial.meets_target = trial.accuracy >= res.target - 1e-12;
      res.trials.push_back(trial);
      log << "  (" << v.variant << ") T=" << t << " accuracy " << fmt("%.2f", 100.0 * trial.accuracy)
          << "% (" << correct << "/" << data.test.size() << ")\n";
      if (trial.meets_target) {
        v.timesteps = t;
        v.accuracy = trial.accuracy;
        v.mean_spike_rate = trial.mean_spike_rate;
        v.energy_ratio = trial.energy_ratio;
        break;
      }
    }
    log << "(" << v.variant << ") " << v.label << ": "
        << (v.timesteps > 0 ? "T=" + std::to_string(v.timesteps) : std::string("target not reached"))
        << "\n";
  }

  std::ostringstream summary, trials;
  summary << "variant,label,encoding,train_threshold,train_leak,timesteps,accuracy,mean_spike_rate,"
             "energy_ratio\n";
  for (const AblationVariant& v : res.variants) {
    summary << v.variant << "," << v.label << "," << encoding_name(v.encoding) << ","
            << v.train_threshold << "," << v.train_leak << "," << v.timesteps << ","
            << fmt("%.6f", v.accuracy) << "," << fmt("%.6f", v.mean_spike_rate) << ","
            << fmt("%.4f", v.energy_ratio) << "\n";
  }
  trials << "variant,timesteps,accuracy,mean_spike_rate,energy_ratio,meets_target\n";
  for (const AblationTrial& t : res.trials) {
    trials << t.variant << "," << t.timesteps << "," << fmt("%.6f", t.accuracy) << ","
           << fmt("%.6f", t.mean_spike_rate) << "," << fmt("%.4f", t.energy_ratio) << ","
           << t.meets_target << "\n";
  }
  write_text_atomic(cfg.out_dir / "ablation.csv", summary.str());
  write_text_atomic(cfg.out_dir / "ablation_trials.csv", trials.str());
  return res;
}

}  // namespace dietsnn
