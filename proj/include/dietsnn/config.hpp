#ifndef DIETSNN_CONFIG_HPP
#define DIETSNN_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dietsnn/bptt.hpp"
#include "dietsnn/dataset.hpp"
#include "dietsnn/energy.hpp"

namespace dietsnn {

/// Invalid or unknown configuration entry. `field` is "section.key".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& why)
      : std::invalid_argument(field + ": " + why), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct DataConfig {
  std::string kind = "synth";  // synth | idx | cifar
  std::string task = "two-class-blobs";
  std::size_t train_count = 512;
  std::size_t test_count = 256;
  std::string train_images, train_labels, test_images, test_labels;  // idx
  std::string train_file, test_file;                                 // cifar
  std::size_t label_bytes = 1;
  std::size_t classes = 10;
  Normalization norm;
};

struct AblationConfig {
  std::vector<int> timesteps{1, 2, 3, 4, 5, 6, 8, 10, 12, 16, 20, 25, 30, 40, 50};
  int epochs = 5;
  /// Iso-accuracy target: ANN test accuracy minus this many points.
  double tolerance = 2.0;
};

struct ExperimentConfig {
  DataConfig data;
  std::string preset = "vgg6-mini";
  std::string layers;  // inline stack without the input token; overrides preset
  double dropout = 0.1;
  TrainConfig ann;
  TrainConfig snn;
  int timesteps = 5;
  Encoding encoding = Encoding::direct;
  double percentile = 99.7;
  std::size_t calib_count = 512;
  EnergyModel energy;
  AblationConfig ablate;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";

  /// Parses INI text; every key is validated and unknown keys are rejected.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Applies "section.key=value" overrides on top of the parsed file text.
  static ExperimentConfig parse(const std::string& text,
                                const std::vector<std::string>& overrides);

  /// Every recognized key with its help text, for --help.
  static const std::vector<std::pair<std::string, std::string>>& documented_keys();
};

}  // namespace dietsnn

#endif  // DIETSNN_CONFIG_HPP
