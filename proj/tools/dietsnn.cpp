// dietsnn: ANN training, conversion, spiking fine-tuning and analysis.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "dietsnn/commands.hpp"
#include "dietsnn/dataset.hpp"

namespace {

std::string keys_help() {
  std::string s = "Config keys ([section] key = value; --set section.key=value):\n";
  for (const auto& [key, help] : dietsnn::ExperimentConfig::documented_keys()) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %-22s %s\n", key.c_str(), help.c_str());
    s += buf;
  }
  return s;
}

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::string checkpoint;
  std::string stats;
  std::string seed, out_dir, timesteps, percentile, encoding;
};

dietsnn::ExperimentConfig load_config(const Flags& f) {
  std::string text;
  if (!f.config.empty()) {
    const auto bytes = dietsnn::read_file_bytes(f.config);
    text.assign(bytes.begin(), bytes.end());
  }
  std::vector<std::string> overrides = f.sets;
  auto flag = [&](const std::string& v, const char* key) {
    if (!v.empty()) overrides.push_back(std::string(key) + "=" + v);
  };
  flag(f.seed, "run.seed");
  flag(f.out_dir, "run.out_dir");
  flag(f.timesteps, "snn.timesteps");
  flag(f.percentile, "convert.percentile");
  flag(f.encoding, "snn.encoding");
  return dietsnn::ExperimentConfig::parse(text, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking network training with trainable leak and threshold"};
  app.footer(keys_help());
  app.require_subcommand(1);
  Flags f;

  auto common = [&f](CLI::App* sub, bool needs_ckpt) {
    sub->add_option("-c,--config", f.config, "experiment config file")->check(CLI::ExistingFile);
    sub->add_option("--set", f.sets, "override, section.key=value (repeatable)");
    sub->add_option("--seed", f.seed, "run.seed");
    sub->add_option("-o,--out-dir", f.out_dir, "run.out_dir");
    sub->add_option("-T,--timesteps", f.timesteps, "snn.timesteps");
    sub->add_option("-p,--percentile", f.percentile, "convert.percentile");
    sub->add_option("--encoding", f.encoding, "snn.encoding");
    if (needs_ckpt) sub->add_option("--checkpoint", f.checkpoint, "input checkpoint")->required();
  };

  auto* train = app.add_subcommand("train-ann", "train the ANN; writes ann.ckpt and ann_metrics.csv");
  common(train, false);
  auto* conv = app.add_subcommand("convert", "ANN -> IF spiking network; writes converted.ckpt and calibration.csv");
  common(conv, true);
  auto* fine = app.add_subcommand("finetune", "BPTT over weights, thresholds and leaks; writes diet.ckpt");
  common(fine, true);
  auto* eval = app.add_subcommand("eval", "test accuracy and per-layer spike rates; writes eval.csv");
  common(eval, true);
  auto* energy = app.add_subcommand("energy", "compute-energy comparison; writes energy.csv and energy.txt");
  common(energy, false);
  energy->add_option("--checkpoint", f.checkpoint, "spiking checkpoint");
  energy->add_option("--stats", f.stats, "file with a=, b=, c= (prints the ratio only)")
      ->check(CLI::ExistingFile);
  auto* ablate = app.add_subcommand("ablate", "timesteps needed per variant at iso-accuracy; writes ablation.csv");
  common(ablate, false);

  CLI11_PARSE(app, argc, argv);

  try {
    const dietsnn::ExperimentConfig cfg = load_config(f);
    if (train->parsed()) {
      dietsnn::run_train_ann(cfg, std::cout);
    } else if (conv->parsed()) {
      dietsnn::run_convert(cfg, f.checkpoint, std::cout);
    } else if (fine->parsed()) {
      dietsnn::run_finetune(cfg, f.checkpoint, std::cout);
    } else if (eval->parsed()) {
      dietsnn::run_eval(cfg, f.checkpoint, std::cout);
    } else if (energy->parsed()) {
      if (!f.stats.empty()) {
        std::printf("%.1f\n", dietsnn::energy_ratio_from_stats(f.stats, cfg.energy));
      } else if (!f.checkpoint.empty()) {
        dietsnn::run_energy(cfg, f.checkpoint, std::cout);
      } else {
        std::cerr << "energy: --checkpoint or --stats is required\n";
        return 2;
      }
    } else if (ablate->parsed()) {
      dietsnn::run_ablate(cfg, std::cout);
    }
  } catch (const dietsnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
