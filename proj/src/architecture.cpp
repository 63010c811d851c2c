#include "dietsnn/architecture.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace dietsnn {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::size_t parse_size(const std::string& token, const std::string& field) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw std::invalid_argument("architecture: bad integer '" + token + "' in " + field);
  }
  return v;
}

double parse_real(const std::string& token, const std::string& field) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || token.empty()) {
    throw std::invalid_argument("architecture: bad number '" + token + "' in " + field);
  }
  return v;
}

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::dense: return "dense";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::dropout: return "dropout";
    case LayerKind::head: return "head";
  }
  return "?";
}

Architecture::Architecture(Shape input_shape, std::vector<LayerDef> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (input_shape_.size() != 3 || shape_numel(input_shape_) == 0) {
    throw ShapeError("architecture: input shape must be [c,h,w] with positive dims, got " +
                     shape_str(input_shape_));
  }
  if (layers_.empty() || layers_.back().kind != LayerKind::head) {
    throw std::invalid_argument("architecture: the last layer must be the output head");
  }
  Shape cur = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    LayerDef& l = layers_[i];
    const std::string where = "layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) + ")";
    in_shapes_.push_back(cur);
    switch (l.kind) {
      case LayerKind::conv: {
        if (cur.size() != 3) {
          throw ShapeError(where + ": convolution needs a [c,h,w] input, got " + shape_str(cur));
        }
        if (l.conv.in_channels != cur[0]) {
          throw ShapeError(where + ": in_channels " + std::to_string(l.conv.in_channels) +
                           " but incoming channels are " + std::to_string(cur[0]));
        }
        l.conv.validate(cur[1], cur[2]);
        cur = {l.conv.out_channels, l.conv.out_h(cur[1]), l.conv.out_w(cur[2])};
        break;
      }
      case LayerKind::avgpool:
        if (cur.size() != 3 || l.pool == 0 || cur[1] < l.pool || cur[2] < l.pool) {
          throw ShapeError(where + ": pool window " + std::to_string(l.pool) +
                           " does not fit " + shape_str(cur));
        }
        cur = {cur[0], cur[1] / l.pool, cur[2] / l.pool};
        break;
      case LayerKind::dropout:
        if (!(l.drop_p >= 0.0 && l.drop_p < 1.0)) {
          throw std::invalid_argument(where + ": drop probability must be in [0,1), got " +
                                      fmt_real(l.drop_p));
        }
        break;
      case LayerKind::dense:
      case LayerKind::head:
        if (l.out_features == 0) throw ShapeError(where + ": out_features must be >= 1");
        if (l.kind == LayerKind::head && i + 1 != layers_.size()) {
          throw std::invalid_argument(where + ": only one head is allowed, and it must be last");
        }
        cur = {l.out_features};
        break;
    }
    out_shapes_.push_back(cur);
  }
}

Shape Architecture::weight_shape(std::size_t i) const {
  const LayerDef& l = layers_.at(i);
  switch (l.kind) {
    case LayerKind::conv: return l.conv.weight_shape();
    case LayerKind::dense:
    case LayerKind::head: return {l.out_features, shape_numel(in_shapes_[i])};
    default: return {};
  }
}

std::size_t Architecture::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].has_weights()) n += shape_numel(weight_shape(i));
    if (layers_[i].is_spiking()) n += 2;
  }
  return n;
}

Architecture Architecture::parse(const std::string& text) {
  std::istringstream is(text);
  std::string token;
  Shape input;
  std::vector<LayerDef> layers;
  std::size_t channels = 0;
  while (is >> token) {
    const auto parts = split(token, ':');
    const std::string& kind = parts[0];
    auto need = [&](std::size_t n) {
      if (parts.size() != n + 1) {
        throw std::invalid_argument("architecture: '" + token + "' expects " + std::to_string(n) +
                                    " fields");
      }
    };
    if (kind == "input") {
      need(3);
      input = {parse_size(parts[1], token), parse_size(parts[2], token),
               parse_size(parts[3], token)};
      channels = input[0];
    } else if (kind == "conv") {
      need(4);
      LayerDef l;
      l.kind = LayerKind::conv;
      l.conv.out_channels = parse_size(parts[1], token);
      l.conv.kernel_h = l.conv.kernel_w = parse_size(parts[2], token);
      l.conv.stride = parse_size(parts[3], token);
      l.conv.padding = parse_size(parts[4], token);
      l.conv.in_channels = channels;
      channels = l.conv.out_channels;
      layers.push_back(l);
    } else if (kind == "avgpool") {
      need(1);
      LayerDef l;
      l.kind = LayerKind::avgpool;
      l.pool = parse_size(parts[1], token);
      layers.push_back(l);
    } else if (kind == "dropout") {
      need(1);
      LayerDef l;
      l.kind = LayerKind::dropout;
      l.drop_p = parse_real(parts[1], token);
      layers.push_back(l);
    } else if (kind == "dense" || kind == "head") {
      need(1);
      LayerDef l;
      l.kind = kind == "dense" ? LayerKind::dense : LayerKind::head;
      l.out_features = parse_size(parts[1], token);
      layers.push_back(l);
    } else if (kind == "bias" || kind == "batchnorm" || kind == "bn") {
      throw std::invalid_argument("architecture: '" + kind +
                                  "' is not supported; networks are bias-free without "
                                  "batch normalization");
    } else {
      throw std::invalid_argument("architecture: unknown layer '" + token + "'");
    }
  }
  if (input.empty()) throw std::invalid_argument("architecture: missing input:C:H:W");
  return Architecture(std::move(input), std::move(layers));
}

std::string Architecture::describe() const {
  std::ostringstream os;
  os << "input:" << input_shape_[0] << ':' << input_shape_[1] << ':' << input_shape_[2];
  for (const LayerDef& l : layers_) {
    os << ' ' << layer_kind_name(l.kind);
    switch (l.kind) {
      case LayerKind::conv:
        os << ':' << l.conv.out_channels << ':' << l.conv.kernel_h << ':' << l.conv.stride << ':'
           << l.conv.padding;
        break;
      case LayerKind::avgpool: os << ':' << l.pool; break;
      case LayerKind::dropout: os << ':' << fmt_real(l.drop_p); break;
      case LayerKind::dense:
      case LayerKind::head: os << ':' << l.out_features; break;
    }
  }
  return os.str();
}

Architecture make_preset(const std::string& name, const Shape& input_shape, std::size_t classes,
                         double dropout) {
  if (input_shape.size() != 3) throw ShapeError("make_preset: input must be [c,h,w]");
  const std::string in = "input:" + std::to_string(input_shape[0]) + ":" +
                         std::to_string(input_shape[1]) + ":" + std::to_string(input_shape[2]);
  const std::string drop = fmt_real(dropout);
  const std::string head = " head:" + std::to_string(classes);
  if (name == "vgg6-mini") {
    return Architecture::parse(in + " conv:8:3:1:1 conv:8:3:1:1 avgpool:2 conv:16:3:1:1 avgpool:2" +
                               " dense:64 dropout:" + drop + head);
  }
  if (name == "tiny") {
    return Architecture::parse(in + " conv:4:3:1:1 avgpool:2 dense:16" + head);
  }
  if (name == "mlp") {
    return Architecture::parse(in + " dense:64 dropout:" + drop + head);
  }
  throw std::invalid_argument("unknown architecture preset '" + name +
                              "' (known: vgg6-mini, tiny, mlp)");
}

std::vector<Tensor> init_weights(const Architecture& arch, std::uint64_t seed) {
  std::vector<Tensor> weights(arch.size());
  for (std::size_t i = 0; i < arch.size(); ++i) {
    if (!arch.layer(i).has_weights()) continue;
    const Shape ws = arch.weight_shape(i);
    const std::size_t fan_in = shape_numel(ws) / ws[0];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Rng rng(derive_seed(seed, Stream::init, {i}));
    Tensor w(ws);
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    weights[i] = std::move(w);
  }
  return weights;
}

}  // namespace dietsnn
