#include "dietsnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dietsnn/dataset.hpp"

namespace dietsnn {

namespace {

constexpr char kMagic[8] = {'D', 'I', 'E', 'T', 'S', 'N', 'N', '\0'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  std::size_t pos() const { return pos_; }
  void need(std::size_t n, const std::string& what) {
    if (b_.size() - pos_ < n) {
      throw ParseError("checkpoint: truncated " + what + ", expected " + std::to_string(n) +
                           " bytes, got " + std::to_string(b_.size() - pos_),
                       pos_);
    }
  }
  std::uint8_t u8(const std::string& what) {
    need(1, what);
    return b_[pos_++];
  }
  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64(const std::string& what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b_[pos_++]} << (8 * i);
    return v;
  }
  double f64(const std::string& what) { return std::bit_cast<double>(u64(what)); }
  std::string str(const std::string& what) {
    const std::uint32_t n = u32(what + " length");
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

std::string weight_name(std::size_t l) { return "layer" + std::to_string(l) + ".weight"; }
std::string leak_name(std::size_t l) { return "layer" + std::to_string(l) + ".leak"; }
std::string threshold_name(std::size_t l) { return "layer" + std::to_string(l) + ".threshold"; }

Architecture checked_architecture(const Checkpoint& ckpt, const Architecture* expected) {
  Architecture arch = Architecture::parse(ckpt.architecture);
  if (expected != nullptr && !(arch == *expected)) {
    std::ostringstream diff;
    diff << "checkpoint architecture mismatch:";
    const std::size_t n = std::max(arch.size(), expected->size());
    if (arch.input_shape() != expected->input_shape()) {
      diff << " input " << shape_str(arch.input_shape()) << " vs expected "
           << shape_str(expected->input_shape()) << ';';
    }
    for (std::size_t i = 0; i < n; ++i) {
      const bool in_a = i < arch.size(), in_b = i < expected->size();
      if (in_a && in_b && arch.layer(i) == expected->layer(i)) continue;
      diff << " layer " << i << ": "
           << (in_a ? layer_kind_name(arch.layer(i).kind) : "<none>") << " "
           << (in_a ? shape_str(arch.out_shape(i)) : "") << " vs expected "
           << (in_b ? layer_kind_name(expected->layer(i).kind) : "<none>") << " "
           << (in_b ? shape_str(expected->out_shape(i)) : "") << ';';
    }
    throw std::invalid_argument(diff.str());
  }
  return arch;
}

}  // namespace

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::ann: return "ann";
    case Stage::converted: return "converted";
    case Stage::diet: return "diet";
  }
  return "?";
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(stage));
  w.u32(encoding == Encoding::direct ? 0u : 1u);
  w.u32(static_cast<std::uint32_t>(timesteps));
  w.str(architecture);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.str(name);
    w.u8(1);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.values()) w.f64(v);
  }
  return w.take();
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic, "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ParseError("checkpoint: bad magic", 0);
  }
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.u8("magic");
  Checkpoint c;
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw ParseError("checkpoint: version " + std::to_string(version) + " not supported (expected " +
                         std::to_string(kVersion) + ")",
                     8);
  }
  const std::uint32_t stage = r.u32("stage");
  if (stage > 2) throw ParseError("checkpoint: unknown stage " + std::to_string(stage), r.pos() - 4);
  c.stage = static_cast<Stage>(stage);
  const std::uint32_t enc = r.u32("encoding");
  if (enc > 1) throw ParseError("checkpoint: unknown encoding " + std::to_string(enc), r.pos() - 4);
  c.encoding = enc == 0 ? Encoding::direct : Encoding::poisson;
  c.timesteps = static_cast<int>(r.u32("timesteps"));
  c.architecture = r.str("architecture");
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str("tensor name");
    const std::uint8_t dtype = r.u8("dtype of " + name);
    if (dtype != 1) {
      throw ParseError("checkpoint: tensor '" + name + "' has unsupported dtype " +
                           std::to_string(dtype),
                       r.pos() - 1);
    }
    const std::uint32_t rank = r.u32("rank of " + name);
    Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(r.u64("shape of " + name));
      numel *= shape.back();
    }
    const std::size_t have = (bytes.size() - r.pos()) / 8;
    if (numel > have) {
      throw ParseError("checkpoint: tensor '" + name + "' needs " + std::to_string(numel) +
                           " values but only " + std::to_string(have) + " remain",
                       r.pos());
    }
    std::vector<double> data(numel);
    for (double& v : data) v = r.f64("data of " + name);
    c.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) {
    throw ParseError("checkpoint: " + std::to_string(bytes.size() - r.pos()) +
                         " trailing bytes after the last tensor",
                     r.pos());
  }
  return c;
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw std::invalid_argument("checkpoint: missing tensor '" + name + "'");
}

Checkpoint to_checkpoint(const Network& net, Stage stage) {
  net.validate();
  Checkpoint c;
  c.stage = stage;
  c.architecture = net.arch.describe();
  c.timesteps = net.timesteps;
  c.encoding = net.encoding;
  for (std::size_t l = 0; l < net.arch.size(); ++l) {
    if (net.arch.layer(l).has_weights()) c.tensors.emplace_back(weight_name(l), net.weights[l]);
    if (net.arch.layer(l).is_spiking()) {
      c.tensors.emplace_back(leak_name(l), Tensor({1}, {net.neurons[l].leak}));
      c.tensors.emplace_back(threshold_name(l), Tensor({1}, {net.neurons[l].threshold}));
    }
  }
  return c;
}

Checkpoint to_checkpoint(const AnnNetwork& ann) {
  ann.validate();
  Checkpoint c;
  c.stage = Stage::ann;
  c.architecture = ann.arch.describe();
  for (std::size_t l = 0; l < ann.arch.size(); ++l) {
    if (ann.arch.layer(l).has_weights()) c.tensors.emplace_back(weight_name(l), ann.weights[l]);
  }
  return c;
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void save_checkpoint(const Network& net, Stage stage, const std::filesystem::path& path) {
  write_file_atomic(path, to_checkpoint(net, stage).serialize());
}

void save_checkpoint(const AnnNetwork& ann, const std::filesystem::path& path) {
  write_file_atomic(path, to_checkpoint(ann).serialize());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return Checkpoint::deserialize(read_file_bytes(path));
}

Network network_from_checkpoint(const Checkpoint& ckpt, const Architecture* expected) {
  if (ckpt.stage == Stage::ann) {
    throw std::invalid_argument("checkpoint: stage 'ann' holds a ReLU network, not a spiking one");
  }
  Architecture arch = checked_architecture(ckpt, expected);
  Network net;
  net.weights.resize(arch.size());
  net.neurons.assign(arch.size(), LifParams{});
  for (std::size_t l = 0; l < arch.size(); ++l) {
    if (arch.layer(l).has_weights()) net.weights[l] = ckpt.tensor(weight_name(l));
    if (arch.layer(l).is_spiking()) {
      net.neurons[l].leak = ckpt.tensor(leak_name(l))[0];
      net.neurons[l].threshold = ckpt.tensor(threshold_name(l))[0];
      if (ckpt.stage == Stage::converted && net.neurons[l].leak != 1.0) {
        throw std::invalid_argument("checkpoint: converted-stage layer " + std::to_string(l) +
                                    " has leak " + std::to_string(net.neurons[l].leak) +
                                    " (must be 1)");
      }
    }
  }
  net.arch = std::move(arch);
  net.timesteps = ckpt.timesteps;
  net.encoding = ckpt.encoding;
  net.validate();
  return net;
}

AnnNetwork ann_from_checkpoint(const Checkpoint& ckpt, const Architecture* expected) {
  if (ckpt.stage != Stage::ann) {
    throw std::invalid_argument(std::string("checkpoint: expected stage 'ann', got '") +
                                stage_name(ckpt.stage) + "'");
  }
  AnnNetwork ann;
  ann.arch = checked_architecture(ckpt, expected);
  ann.weights.resize(ann.arch.size());
  for (std::size_t l = 0; l < ann.arch.size(); ++l) {
    if (ann.arch.layer(l).has_weights()) ann.weights[l] = ckpt.tensor(weight_name(l));
  }
  ann.validate();
  return ann;
}

Network load_checkpoint(const std::filesystem::path& path, const Architecture* expected) {
  return network_from_checkpoint(read_checkpoint(path), expected);
}

}  // namespace dietsnn
