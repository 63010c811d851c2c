#ifndef DIETSNN_DATASET_HPP
#define DIETSNN_DATASET_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dietsnn/tensor.hpp"

namespace dietsnn {

/// Images [count, c, h, w] and integer labels in [0, classes).
struct Dataset {
  Tensor images;
  std::vector<std::size_t> labels;
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
  Shape image_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }
  Tensor image(std::size_t i) const { return images.slice(i); }
  /// Checks count(images) == count(labels) and label range.
  void validate() const;
  /// First `count` samples (or all when count >= size()).
  Dataset head(std::size_t count) const;
  /// Fraction of the most frequent label.
  double majority_rate() const;
};

/// Per-channel standardization applied after scaling bytes to [0, 1].
struct Normalization {
  std::vector<double> mean{0.0};
  std::vector<double> stddev{1.0};

  double apply(double value, std::size_t channel) const;
  double invert(double value, std::size_t channel) const;
};

/// Malformed input file. `offset` is the byte position where parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Raw IDX container: big-endian header, unsigned-byte payload.
struct IdxArray {
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> bytes;
};

IdxArray parse_idx(const std::vector<std::uint8_t>& file);
IdxArray read_idx(const std::filesystem::path& path);

/// IDX image file ([n, h, w] or [n, c, h, w]) plus IDX label file ([n]).
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const Normalization& norm, std::size_t classes = 10);

/// CIFAR binary records: `label_bytes` label bytes (1 for CIFAR-10, 2 for
/// CIFAR-100 where the second is the fine label) followed by 3x32x32 pixels.
Dataset load_cifar_binary(const std::filesystem::path& path, const Normalization& norm,
                          std::size_t label_bytes = 1, std::size_t classes = 10);
Dataset parse_cifar_binary(const std::vector<std::uint8_t>& file, const Normalization& norm,
                           std::size_t label_bytes = 1, std::size_t classes = 10);

enum class SynthTask { two_class_blobs, striped_digits };

SynthTask parse_synth_task(const std::string& name);

/// Deterministic toy data with pixels in [0, 1], balanced classes (+-1).
/// two-class-blobs: 1x8x8, linearly separable. striped-digits: 1x8x8, four
/// stripe orientations with random phase and noise.
Dataset synth_dataset(SynthTask task, std::size_t count, std::uint64_t seed);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace dietsnn

#endif  // DIETSNN_DATASET_HPP
