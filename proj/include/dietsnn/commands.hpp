#ifndef DIETSNN_COMMANDS_HPP
#define DIETSNN_COMMANDS_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dietsnn/bptt.hpp"
#include "dietsnn/checkpoint.hpp"
#include "dietsnn/config.hpp"
#include "dietsnn/conversion.hpp"
#include "dietsnn/energy.hpp"

namespace dietsnn {

struct Datasets {
  Dataset train;
  Dataset test;
};

Datasets load_datasets(const ExperimentConfig& cfg);

/// Inline layer list if given, otherwise the preset, for the data's shape.
Architecture build_architecture(const ExperimentConfig& cfg, const Dataset& data);

void write_metrics_csv(std::ostream& os, const TrainReport& report);
void write_calibration_csv(std::ostream& os, const CalibrationReport& report);

// Each command writes its artifacts into cfg.out_dir (created if missing) and
// logs a short summary to `log`.

/// ann.ckpt, ann_metrics.csv
AnnEval run_train_ann(const ExperimentConfig& cfg, std::ostream& log);

/// converted.ckpt, calibration.csv
CalibrationReport run_convert(const ExperimentConfig& cfg, const std::filesystem::path& ann_ckpt,
                              std::ostream& log);

/// diet.ckpt, finetune_metrics.csv. T and encoding come from cfg.
TrainReport run_finetune(const ExperimentConfig& cfg, const std::filesystem::path& converted_ckpt,
                         std::ostream& log);

struct EvalSummary {
  Stage stage = Stage::ann;
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<double> spike_rates;  // empty for an ANN checkpoint
};

/// eval.csv. Accepts any stage; ANN checkpoints report no spike rates.
EvalSummary run_eval(const ExperimentConfig& cfg, const std::filesystem::path& ckpt,
                     std::ostream& log);

/// energy.csv, energy.txt (test-set spike statistics).
EnergyReport run_energy(const ExperimentConfig& cfg, const std::filesystem::path& ckpt,
                        std::ostream& log);

/// Reads "a=", "b=", "c=" lines (a defaults to 1) and returns the ratio.
double energy_ratio_from_stats(const std::filesystem::path& stats, const EnergyModel& model);

struct AblationTrial {
  char variant = 'a';
  int timesteps = 0;
  double accuracy = 0.0;
  double mean_spike_rate = 0.0;
  double energy_ratio = 0.0;
  bool meets_target = false;
};

struct AblationVariant {
  char variant = 'a';
  std::string label;
  Encoding encoding = Encoding::direct;
  bool train_threshold = false;
  bool train_leak = false;
  int timesteps = -1;  // first grid T reaching the target, -1 if none
  double accuracy = 0.0;
  double mean_spike_rate = 0.0;
  double energy_ratio = 0.0;
};

struct AblationResult {
  double ann_accuracy = 0.0;
  double target = 0.0;
  std::vector<AblationVariant> variants;  // a, b, c, d
  std::vector<AblationTrial> trials;
};

/// Trains one ANN, then for each variant walks the timestep grid upward,
/// converting and fine-tuning at each T until test accuracy reaches
/// ann_accuracy - tolerance. ablation.csv, ablation_trials.csv.
AblationResult run_ablate(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace dietsnn

#endif  // DIETSNN_COMMANDS_HPP
