#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dietsnn/dataset.hpp"

using namespace dietsnn;

namespace {

std::vector<std::uint8_t> idx_bytes(const std::vector<std::uint32_t>& dims,
                                    const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> b{0, 0, 0x08, static_cast<std::uint8_t>(dims.size())};
  for (std::uint32_t d : dims) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(d >> s));
  }
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

std::filesystem::path write_tmp(const std::string& name, const std::vector<std::uint8_t>& bytes) {
  const auto p = std::filesystem::temp_directory_path() / ("dietsnn_test_" + name);
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                           static_cast<std::streamsize>(bytes.size()));
  return p;
}

}  // namespace

TEST(Idx, HandcraftedTwoImages) {
  const auto imgs = write_tmp("img.idx", idx_bytes({2, 2, 2}, {0, 255, 51, 102, 255, 0, 0, 255}));
  const auto labs = write_tmp("lab.idx", idx_bytes({2}, {3, 1}));
  const Dataset d = load_idx(imgs, labs, {}, 10);
  ASSERT_EQ(d.images.shape(), (Shape{2, 1, 2, 2}));
  const double want[8] = {0.0, 1.0, 0.2, 0.4, 1.0, 0.0, 0.0, 1.0};
  for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(d.images[i], want[i]);
  EXPECT_EQ(d.labels, (std::vector<std::size_t>{3, 1}));

  Normalization norm{{0.5}, {0.25}};
  const Dataset n = load_idx(imgs, labs, norm, 10);
  EXPECT_DOUBLE_EQ(n.images[1], 2.0);
  EXPECT_DOUBLE_EQ(norm.invert(n.images[2], 0), 0.2);
}

TEST(Idx, ZeroImageStandardized) {
  const auto imgs = write_tmp("zimg.idx", idx_bytes({1, 2, 2}, {0, 0, 0, 0}));
  const auto labs = write_tmp("zlab.idx", idx_bytes({1}, {0}));
  const Dataset d = load_idx(imgs, labs, Normalization{{0.1307}, {0.3081}}, 10);
  for (double v : d.images.values()) EXPECT_DOUBLE_EQ(v, -0.1307 / 0.3081);
}

TEST(Idx, ErrorPaths) {
  try {
    parse_idx({0, 0, 8, 3, 0, 0});
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("expected 16"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_idx({1, 0, 8, 1, 0, 0, 0, 0}), ParseError);
  EXPECT_THROW(parse_idx({0, 0, 0x0D, 1, 0, 0, 0, 0}), ParseError);
  EXPECT_THROW(parse_idx(idx_bytes({3}, {1, 2})), ParseError);
  const auto imgs = write_tmp("eimg.idx", idx_bytes({2, 1, 1}, {1, 2}));
  const auto labs = write_tmp("elab.idx", idx_bytes({2}, {0, 12}));
  EXPECT_THROW(load_idx(imgs, labs, {}, 10), std::invalid_argument);
  EXPECT_THROW(load_idx("/nonexistent/file", labs, {}, 10), std::runtime_error);
}

TEST(Cifar, RecordsAndShortFile) {
  std::vector<std::uint8_t> bytes;
  for (int r = 0; r < 2; ++r) {
    bytes.push_back(static_cast<std::uint8_t>(7 - r));
    for (int p = 0; p < 3072; ++p) bytes.push_back(static_cast<std::uint8_t>((p / 1024) * 100 + r));
  }
  const Dataset d = parse_cifar_binary(bytes, {}, 1, 10);
  ASSERT_EQ(d.images.shape(), (Shape{2, 3, 32, 32}));
  EXPECT_EQ(d.labels, (std::vector<std::size_t>{7, 6}));
  EXPECT_DOUBLE_EQ(d.images[2048], 200.0 / 255.0);
  EXPECT_DOUBLE_EQ(d.images[3072 + 1024], 101.0 / 255.0);

  const Dataset n = parse_cifar_binary(bytes, Normalization{{0.0, 0.5, 1.0}, {1.0, 2.0, 4.0}}, 1, 10);
  EXPECT_DOUBLE_EQ(n.images[1024], (100.0 / 255.0 - 0.5) / 2.0);

  bytes.pop_back();
  try {
    parse_cifar_binary(bytes, {}, 1, 10);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 3073u);
  }
  EXPECT_THROW(parse_cifar_binary(std::vector<std::uint8_t>(3074, 0), {}, 3, 10), std::invalid_argument);
  EXPECT_THROW(parse_cifar_binary(std::vector<std::uint8_t>(3073, 0), Normalization{{0, 0}, {1, 1}}, 1, 10),
               std::invalid_argument);
}

TEST(Synth, BalancedDeterministicAndInRange) {
  for (SynthTask t : {SynthTask::two_class_blobs, SynthTask::striped_digits}) {
    const Dataset a = synth_dataset(t, 64, 5), b = synth_dataset(t, 64, 5);
    EXPECT_TRUE(a.images == b.images);
    EXPECT_DOUBLE_EQ(a.majority_rate(), 1.0 / double(a.classes));
    for (double v : a.images.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_NO_THROW(a.validate());
  }
  EXPECT_THROW(parse_synth_task("spirals"), std::invalid_argument);
}

TEST(Synth, BlobsAreLinearlySeparable) {
  // Perceptron on raw pixels as an independent check on the task itself.
  const Dataset d = synth_dataset(SynthTask::two_class_blobs, 200, 7);
  std::vector<double> w(64, 0.0);
  double b = 0.0;
  for (int epoch = 0; epoch < 50; ++epoch) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      const Tensor x = d.image(i);
      double s = b;
      for (std::size_t k = 0; k < 64; ++k) s += w[k] * x[k];
      const double y = d.labels[i] == 1 ? 1.0 : -1.0;
      if (s * y <= 0) {
        for (std::size_t k = 0; k < 64; ++k) w[k] += y * x[k];
        b += y;
      }
    }
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Tensor x = d.image(i);
    double s = b;
    for (std::size_t k = 0; k < 64; ++k) s += w[k] * x[k];
    correct += (s > 0) == (d.labels[i] == 1);
  }
  EXPECT_EQ(correct, d.size());
}

TEST(Dataset, HeadAndValidation) {
  const Dataset d = synth_dataset(SynthTask::striped_digits, 10, 1);
  const Dataset h = d.head(3);
  EXPECT_EQ(h.size(), 3u);
  EXPECT_TRUE(h.image(2) == d.image(2));
  EXPECT_EQ(d.head(100).size(), 10u);
  Dataset bad = d;
  bad.labels.pop_back();
  EXPECT_THROW(bad.validate(), ShapeError);
}
