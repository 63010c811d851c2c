#ifndef DIETSNN_ARCHITECTURE_HPP
#define DIETSNN_ARCHITECTURE_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "dietsnn/kernels.hpp"
#include "dietsnn/rng.hpp"
#include "dietsnn/tensor.hpp"

namespace dietsnn {

enum class LayerKind { conv, dense, avgpool, dropout, head };

const char* layer_kind_name(LayerKind kind);

/// One entry of the layer stack. There is no bias anywhere.
struct LayerDef {
  LayerKind kind = LayerKind::dense;
  ConvSpec conv;                 // conv
  std::size_t out_features = 0;  // dense, head
  std::size_t pool = 2;          // avgpool window (= stride)
  double drop_p = 0.0;           // dropout

  bool has_weights() const {
    return kind == LayerKind::conv || kind == LayerKind::dense || kind == LayerKind::head;
  }
  /// conv and dense layers hold LIF neurons in the spiking network.
  bool is_spiking() const { return kind == LayerKind::conv || kind == LayerKind::dense; }

  friend bool operator==(const LayerDef&, const LayerDef&) = default;
};

/// A validated layer stack with every intermediate shape resolved.
class Architecture {
 public:
  Architecture() = default;
  /// Throws ShapeError / std::invalid_argument when layers do not compose or
  /// the stack does not end in exactly one head.
  Architecture(Shape input_shape, std::vector<LayerDef> layers);

  /// Parses "input:C:H:W conv:OUT:K:STRIDE:PAD avgpool:K dropout:P dense:OUT head:N".
  /// For conv the input channels are inferred.
  static Architecture parse(const std::string& text);
  /// Inverse of parse; exact for every double (17 significant digits).
  std::string describe() const;

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<LayerDef>& layers() const { return layers_; }
  const LayerDef& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t size() const { return layers_.size(); }
  const Shape& in_shape(std::size_t i) const { return in_shapes_.at(i); }
  const Shape& out_shape(std::size_t i) const { return out_shapes_.at(i); }
  std::size_t classes() const { return layers_.back().out_features; }
  Shape weight_shape(std::size_t i) const;
  std::size_t parameter_count() const;

  friend bool operator==(const Architecture& a, const Architecture& b) {
    return a.input_shape_ == b.input_shape_ && a.layers_ == b.layers_;
  }

 private:
  Shape input_shape_;
  std::vector<LayerDef> layers_;
  std::vector<Shape> in_shapes_;
  std::vector<Shape> out_shapes_;
};

/// Named presets. "vgg6-mini" expects a [c, h, w] input with h, w divisible by 4.
Architecture make_preset(const std::string& name, const Shape& input_shape, std::size_t classes,
                         double dropout = 0.1);

/// He-uniform initial weights per weighted layer (empty tensor elsewhere).
std::vector<Tensor> init_weights(const Architecture& arch, std::uint64_t seed);

}  // namespace dietsnn

#endif  // DIETSNN_ARCHITECTURE_HPP
