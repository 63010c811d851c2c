#include "dietsnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "dietsnn/rng.hpp"

namespace dietsnn {

void Dataset::validate() const {
  if (images.rank() != 4) {
    throw ShapeError("dataset: images must be [count,c,h,w], got " + shape_str(images.shape()));
  }
  if (images.dim(0) != labels.size()) {
    throw ShapeError("dataset: " + std::to_string(images.dim(0)) + " images but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw std::invalid_argument("dataset: label " + std::to_string(labels[i]) + " at index " +
                                  std::to_string(i) + " outside [0," + std::to_string(classes) +
                                  ")");
    }
  }
}

Dataset Dataset::head(std::size_t count) const {
  if (count >= size()) return *this;
  Dataset d;
  Shape s = images.shape();
  s[0] = count;
  const std::size_t per = shape_numel(image_shape());
  d.images = Tensor(s, std::vector<double>(images.storage().begin(),
                                           images.storage().begin() +
                                               static_cast<std::ptrdiff_t>(count * per)));
  d.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(count));
  d.classes = classes;
  return d;
}

double Dataset::majority_rate() const {
  if (labels.empty()) return 0.0;
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t l : labels) ++counts[l];
  return static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
         static_cast<double>(labels.size());
}

double Normalization::apply(double value, std::size_t channel) const {
  const double m = mean.size() == 1 ? mean[0] : mean.at(channel);
  const double s = stddev.size() == 1 ? stddev[0] : stddev.at(channel);
  return (value - m) / s;
}

double Normalization::invert(double value, std::size_t channel) const {
  const double m = mean.size() == 1 ? mean[0] : mean.at(channel);
  const double s = stddev.size() == 1 ? stddev[0] : stddev.at(channel);
  return value * s + m;
}

namespace {

void check_norm(const Normalization& norm, std::size_t channels) {
  auto ok = [&](const std::vector<double>& v) { return v.size() == 1 || v.size() == channels; };
  if (!ok(norm.mean) || !ok(norm.stddev)) {
    throw std::invalid_argument("normalization: mean/std need 1 or " + std::to_string(channels) +
                                " entries");
  }
  for (double s : norm.stddev) {
    if (!(s > 0.0)) throw std::invalid_argument("normalization: std must be positive");
  }
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

IdxArray parse_idx(const std::vector<std::uint8_t>& file) {
  if (file.size() < 4) {
    throw ParseError("idx: truncated header, expected 4 magic bytes, got " +
                     std::to_string(file.size()),
                     file.size());
  }
  if (file[0] != 0 || file[1] != 0) throw ParseError("idx: bad magic, first two bytes must be 0", 0);
  if (file[2] != 0x08) {
    throw ParseError("idx: unsupported element type 0x" + std::to_string(file[2]) +
                     " (only unsigned byte 0x08)",
                     2);
  }
  const std::size_t ndim = file[3];
  if (ndim == 0) throw ParseError("idx: zero dimensions", 3);
  const std::size_t header = 4 + 4 * ndim;
  if (file.size() < header) {
    throw ParseError("idx: truncated header, expected " + std::to_string(header) +
                     " bytes, got " + std::to_string(file.size()),
                     file.size());
  }
  IdxArray a;
  std::size_t total = 1;
  for (std::size_t d = 0; d < ndim; ++d) {
    a.dims.push_back(read_be32(file, 4 + 4 * d));
    total *= a.dims.back();
  }
  if (file.size() != header + total) {
    throw ParseError("idx: payload expected " + std::to_string(total) + " bytes, got " +
                     std::to_string(file.size() - header),
                     std::min(file.size(), header + total));
  }
  a.bytes.assign(file.begin() + static_cast<std::ptrdiff_t>(header), file.end());
  return a;
}

IdxArray read_idx(const std::filesystem::path& path) { return parse_idx(read_file_bytes(path)); }

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const Normalization& norm, std::size_t classes) {
  const IdxArray img = read_idx(images);
  const IdxArray lab = read_idx(labels);
  Shape shape;
  if (img.dims.size() == 3) {
    shape = {img.dims[0], 1, img.dims[1], img.dims[2]};
  } else if (img.dims.size() == 4) {
    shape = {img.dims[0], img.dims[1], img.dims[2], img.dims[3]};
  } else {
    throw ParseError("idx: image file must have 3 or 4 dimensions, got " +
                     std::to_string(img.dims.size()),
                     3);
  }
  if (lab.dims.size() != 1 || lab.dims[0] != shape[0]) {
    throw ParseError("idx: label file must be [" + std::to_string(shape[0]) + "]", 3);
  }
  check_norm(norm, shape[1]);
  Dataset d;
  d.classes = classes;
  d.images = Tensor(shape);
  const std::size_t plane = shape[2] * shape[3];
  for (std::size_t i = 0; i < img.bytes.size(); ++i) {
    const std::size_t channel = (i / plane) % shape[1];
    d.images[i] = norm.apply(img.bytes[i] / 255.0, channel);
  }
  d.labels.assign(lab.bytes.begin(), lab.bytes.end());
  d.validate();
  return d;
}

Dataset parse_cifar_binary(const std::vector<std::uint8_t>& file, const Normalization& norm,
                           std::size_t label_bytes, std::size_t classes) {
  constexpr std::size_t kPixels = 3 * 32 * 32;
  if (label_bytes != 1 && label_bytes != 2) {
    throw std::invalid_argument("cifar: label_bytes must be 1 or 2");
  }
  const std::size_t record = label_bytes + kPixels;
  if (file.empty() || file.size() % record != 0) {
    const std::size_t whole = file.size() / record;
    throw ParseError("cifar: short record, expected a multiple of " + std::to_string(record) +
                     " bytes, got " + std::to_string(file.size()),
                     whole * record);
  }
  check_norm(norm, 3);
  const std::size_t n = file.size() / record;
  Dataset d;
  d.classes = classes;
  d.images = Tensor({n, 3, 32, 32});
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i * record;
    d.labels[i] = file[base + label_bytes - 1];
    for (std::size_t p = 0; p < kPixels; ++p) {
      d.images[i * kPixels + p] = norm.apply(file[base + label_bytes + p] / 255.0, p / 1024);
    }
  }
  d.validate();
  return d;
}

Dataset load_cifar_binary(const std::filesystem::path& path, const Normalization& norm,
                          std::size_t label_bytes, std::size_t classes) {
  return parse_cifar_binary(read_file_bytes(path), norm, label_bytes, classes);
}

SynthTask parse_synth_task(const std::string& name) {
  if (name == "two-class-blobs") return SynthTask::two_class_blobs;
  if (name == "striped-digits") return SynthTask::striped_digits;
  throw std::invalid_argument("unknown synthetic task '" + name +
                              "' (expected two-class-blobs or striped-digits)");
}

Dataset synth_dataset(SynthTask task, std::size_t count, std::uint64_t seed) {
  if (count < 2) throw std::invalid_argument("synth_dataset: count must be >= 2");
  constexpr std::size_t kSide = 8;
  Dataset d;
  d.classes = task == SynthTask::two_class_blobs ? 2 : 4;
  d.images = Tensor({count, 1, kSide, kSide});
  d.labels.resize(count);
  Rng rng(derive_seed(seed, Stream::data, {static_cast<std::uint64_t>(task)}));

  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % d.classes;
    d.labels[i] = label;
    double* px = d.images.data() + i * kSide * kSide;
    if (task == SynthTask::two_class_blobs) {
      // Gaussian blob in the left (class 0) or right (class 1) half.
      const double cx = (label == 0 ? 1.5 : 5.5) + rng.uniform(-0.5, 0.5);
      const double cy = rng.uniform(2.0, 5.0);
      const double amp = rng.uniform(0.7, 1.0);
      for (std::size_t y = 0; y < kSide; ++y) {
        for (std::size_t x = 0; x < kSide; ++x) {
          const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
          const double v = amp * std::exp(-(dx * dx + dy * dy) / (2.0 * 1.2 * 1.2)) +
                           rng.uniform(0.0, 0.1);
          px[y * kSide + x] = std::clamp(v, 0.0, 1.0);
        }
      }
    } else {
      // Period-4 stripes: horizontal, vertical, diagonal, anti-diagonal.
      const double phase = static_cast<double>(rng.below(4)) + rng.uniform(-0.25, 0.25);
      const double amp = rng.uniform(0.6, 1.0);
      for (std::size_t y = 0; y < kSide; ++y) {
        for (std::size_t x = 0; x < kSide; ++x) {
          const double fx = static_cast<double>(x), fy = static_cast<double>(y);
          const double coord = label == 0 ? fy : label == 1 ? fx : label == 2 ? fx + fy : fx - fy;
          const double wave = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * (coord + phase) / 4.0);
          px[y * kSide + x] = std::clamp(amp * wave + rng.uniform(0.0, 0.2), 0.0, 1.0);
        }
      }
    }
  }
  return d;
}

}  // namespace dietsnn
