#ifndef DIETSNN_CHECKPOINT_HPP
#define DIETSNN_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dietsnn/conversion.hpp"
#include "dietsnn/network.hpp"

namespace dietsnn {

enum class Stage : std::uint32_t { ann = 0, converted = 1, diet = 2 };

const char* stage_name(Stage s);

/// Little-endian container:
///   "DIETSNN\0" | u32 version | u32 stage | u32 encoding | i32 timesteps
///   | u32 len + architecture text | u32 tensor count
///   | per tensor: u32 len + name, u8 dtype (1 = f64), u32 rank, u64 dims[rank], f64 data
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  Stage stage = Stage::ann;
  std::string architecture;  // Architecture::describe()
  int timesteps = 0;
  Encoding encoding = Encoding::direct;
  std::vector<std::pair<std::string, Tensor>> tensors;

  std::vector<std::uint8_t> serialize() const;
  /// Throws ParseError naming the field or tensor that is malformed.
  static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);
  const Tensor& tensor(const std::string& name) const;
};

Checkpoint to_checkpoint(const Network& net, Stage stage);
Checkpoint to_checkpoint(const AnnNetwork& ann);

/// Writes to a temporary file then renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

void save_checkpoint(const Network& net, Stage stage, const std::filesystem::path& path);
void save_checkpoint(const AnnNetwork& ann, const std::filesystem::path& path);

Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Rebuilds a spiking network. When `expected` is given its architecture must
/// match; the error lists the differing layers. A converted-stage checkpoint
/// must have leak 1 in every layer.
Network network_from_checkpoint(const Checkpoint& ckpt, const Architecture* expected = nullptr);
AnnNetwork ann_from_checkpoint(const Checkpoint& ckpt, const Architecture* expected = nullptr);

Network load_checkpoint(const std::filesystem::path& path, const Architecture* expected = nullptr);

}  // namespace dietsnn

#endif  // DIETSNN_CHECKPOINT_HPP
