#include "dietsnn/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "dietsnn/rng.hpp"

namespace dietsnn {

namespace pt = boost::property_tree;

namespace {

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

struct KeySpec {
  std::string key;
  std::string help;
  Setter set;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Parsers used by the setters; each throws a plain message that the caller
// wraps into a ConfigError naming the key.
long long to_int(const std::string& v) {
  std::size_t used = 0;
  const long long x = std::stoll(v, &used);
  if (used != v.size()) throw std::invalid_argument("expected an integer, got '" + v + "'");
  return x;
}

std::size_t to_count(const std::string& v) {
  const long long x = to_int(v);
  if (x < 0) throw std::invalid_argument("must be >= 0");
  return static_cast<std::size_t>(x);
}

double to_real(const std::string& v) {
  std::size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("expected a number, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("expected true/false, got '" + v + "'");
}

std::vector<double> to_reals(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_real(trim(item)));
  if (out.empty()) throw std::invalid_argument("expected a comma-separated list");
  return out;
}

std::vector<int> to_ints(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const long long x = to_int(trim(item));
    if (x < 1) throw std::invalid_argument("timesteps must be >= 1");
    out.push_back(static_cast<int>(x));
  }
  if (out.empty()) throw std::invalid_argument("expected a comma-separated list");
  return out;
}

void train_keys(std::vector<KeySpec>& keys, const std::string& section,
                TrainConfig ExperimentConfig::*member, bool neuron_keys) {
  auto at = [member](ExperimentConfig& c) -> TrainConfig& { return c.*member; };
  keys.push_back({section + ".epochs", "training epochs",
                  [at](ExperimentConfig& c, const std::string& v) {
                    at(c).epochs = static_cast<int>(to_count(v));
                  }});
  keys.push_back({section + ".batch_size", "samples per minibatch",
                  [at](ExperimentConfig& c, const std::string& v) {
                    at(c).batch_size = to_count(v);
                  }});
  keys.push_back({section + ".lr", "learning rate",
                  [at](ExperimentConfig& c, const std::string& v) { at(c).lr = to_real(v); }});
  keys.push_back({section + ".optimizer", "sgd (with momentum) or adam",
                  [at](ExperimentConfig& c, const std::string& v) {
                    at(c).optimizer = parse_optimizer(v);
                  }});
  keys.push_back({section + ".momentum", "SGD momentum",
                  [at](ExperimentConfig& c, const std::string& v) { at(c).momentum = to_real(v); }});
  keys.push_back({section + ".lr_decay_every", "step decay period in epochs (0 = off)",
                  [at](ExperimentConfig& c, const std::string& v) {
                    at(c).lr_decay_every = static_cast<int>(to_count(v));
                  }});
  keys.push_back({section + ".lr_decay", "step decay factor",
                  [at](ExperimentConfig& c, const std::string& v) { at(c).lr_decay = to_real(v); }});
  if (!neuron_keys) return;
  keys.push_back({section + ".gamma", "surrogate gradient peak",
                  [at](ExperimentConfig& c, const std::string& v) {
                    at(c).surrogate.gamma = to_real(v);
                  }});
  keys.push_back({section + ".neuron_lr_scale", "lr multiplier for threshold and leak",
                  [at](ExperimentConfig& c, const std::string& v) {
                    at(c).neuron_lr_scale = to_real(v);
                  }});
  keys.push_back({section + ".threshold_floor", "lower clamp for thresholds",
                  [at](ExperimentConfig& c, const std::string& v) {
                    at(c).threshold_floor = to_real(v);
                  }});
  keys.push_back({section + ".train_threshold", "optimize thresholds (true/false)",
                  [at](ExperimentConfig& c, const std::string& v) {
                    at(c).train_threshold = to_bool(v);
                  }});
  keys.push_back({section + ".train_leak", "optimize leaks (true/false)",
                  [at](ExperimentConfig& c, const std::string& v) {
                    at(c).train_leak = to_bool(v);
                  }});
}

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> keys = [] {
    std::vector<KeySpec> k;
    auto add = [&k](std::string key, std::string help, Setter s) {
      k.push_back({std::move(key), std::move(help), std::move(s)});
    };
    add("data.kind", "synth, idx or cifar",
        [](ExperimentConfig& c, const std::string& v) {
          if (v != "synth" && v != "idx" && v != "cifar")
            throw std::invalid_argument("expected synth, idx or cifar");
          c.data.kind = v;
        });
    add("data.task", "synthetic task: two-class-blobs or striped-digits",
        [](ExperimentConfig& c, const std::string& v) {
          parse_synth_task(v);
          c.data.task = v;
        });
    add("data.train_count", "synthetic training samples (or cap on loaded data, 0 = all)",
        [](ExperimentConfig& c, const std::string& v) { c.data.train_count = to_count(v); });
    add("data.test_count", "synthetic test samples (or cap on loaded data, 0 = all)",
        [](ExperimentConfig& c, const std::string& v) { c.data.test_count = to_count(v); });
    add("data.train_images", "IDX training image file",
        [](ExperimentConfig& c, const std::string& v) { c.data.train_images = v; });
    add("data.train_labels", "IDX training label file",
        [](ExperimentConfig& c, const std::string& v) { c.data.train_labels = v; });
    add("data.test_images", "IDX test image file",
        [](ExperimentConfig& c, const std::string& v) { c.data.test_images = v; });
    add("data.test_labels", "IDX test label file",
        [](ExperimentConfig& c, const std::string& v) { c.data.test_labels = v; });
    add("data.train_file", "CIFAR binary training file",
        [](ExperimentConfig& c, const std::string& v) { c.data.train_file = v; });
    add("data.test_file", "CIFAR binary test file",
        [](ExperimentConfig& c, const std::string& v) { c.data.test_file = v; });
    add("data.label_bytes", "CIFAR label bytes per record (1 or 2)",
        [](ExperimentConfig& c, const std::string& v) { c.data.label_bytes = to_count(v); });
    add("data.classes", "class count for idx/cifar data",
        [](ExperimentConfig& c, const std::string& v) { c.data.classes = to_count(v); });
    add("data.mean", "per-channel mean (comma list) subtracted after scaling to [0,1]",
        [](ExperimentConfig& c, const std::string& v) { c.data.norm.mean = to_reals(v); });
    add("data.std", "per-channel standard deviation (comma list)",
        [](ExperimentConfig& c, const std::string& v) { c.data.norm.stddev = to_reals(v); });
    add("model.preset", "architecture preset: vgg6-mini, tiny or mlp",
        [](ExperimentConfig& c, const std::string& v) { c.preset = v; });
    add("model.layers", "inline layer list, e.g. 'conv:8:3:1:1 avgpool:2 dense:32 head:2'",
        [](ExperimentConfig& c, const std::string& v) { c.layers = v; });
    add("model.dropout", "dropout probability used by presets",
        [](ExperimentConfig& c, const std::string& v) { c.dropout = to_real(v); });
    train_keys(k, "ann", &ExperimentConfig::ann, false);
    train_keys(k, "snn", &ExperimentConfig::snn, true);
    add("snn.timesteps", "simulation timesteps T",
        [](ExperimentConfig& c, const std::string& v) {
          const long long t = to_int(v);
          if (t < 1) throw std::invalid_argument("must be >= 1");
          c.timesteps = static_cast<int>(t);
        });
    add("snn.encoding", "input encoding: direct or poisson",
        [](ExperimentConfig& c, const std::string& v) { c.encoding = parse_encoding(v); });
    add("convert.percentile", "pre-activation percentile for thresholds (0,100]",
        [](ExperimentConfig& c, const std::string& v) {
          const double p = to_real(v);
          if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("must be in (0,100]");
          c.percentile = p;
        });
    add("convert.calib_count", "calibration images (capped by the training set)",
        [](ExperimentConfig& c, const std::string& v) {
          c.calib_count = to_count(v);
          if (c.calib_count == 0) throw std::invalid_argument("must be >= 1");
        });
    add("energy.e_mac", "energy per ANN MAC in pJ",
        [](ExperimentConfig& c, const std::string& v) { c.energy.e_mac = to_real(v); });
    add("energy.e_add", "energy per SNN addition in pJ",
        [](ExperimentConfig& c, const std::string& v) { c.energy.e_add = to_real(v); });
    add("ablate.timesteps", "ascending timestep grid searched per variant",
        [](ExperimentConfig& c, const std::string& v) { c.ablate.timesteps = to_ints(v); });
    add("ablate.epochs", "fine-tuning epochs per variant and T",
        [](ExperimentConfig& c, const std::string& v) {
          c.ablate.epochs = static_cast<int>(to_count(v));
        });
    add("ablate.tolerance", "accuracy points below the ANN that count as iso-accuracy",
        [](ExperimentConfig& c, const std::string& v) { c.ablate.tolerance = to_real(v); });
    add("run.seed", "root seed for every random stream",
        [](ExperimentConfig& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(to_int(v)); });
    add("run.out_dir", "output directory",
        [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; });
    return k;
  }();
  return keys;
}

ExperimentConfig defaults() {
  ExperimentConfig c;
  c.ann.optimizer = OptimizerKind::sgd;
  c.ann.lr = 1e-3;
  c.ann.epochs = 20;
  c.ann.train_threshold = c.ann.train_leak = false;
  c.snn.optimizer = OptimizerKind::adam;
  c.snn.lr = 1e-4;
  c.snn.epochs = 10;
  return c;
}

void apply(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto& specs = key_specs();
  auto it = std::find_if(specs.begin(), specs.end(), [&](const KeySpec& s) { return s.key == key; });
  if (it == specs.end()) throw ConfigError(key, "unknown key");
  try {
    it->set(cfg, trim(value));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

void finalize(ExperimentConfig& c) {
  c.ann.seed = c.seed;
  c.snn.seed = derive_seed(c.seed, Stream::shuffle, {0x5e11});
  auto check = [](const TrainConfig& t, const std::string& section) {
    try {
      t.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(section, e.what());
    }
  };
  check(c.ann, "ann");
  check(c.snn, "snn");
  try {
    c.energy.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("energy", e.what());
  }
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ConfigError("model.dropout", "must be in [0,1)");
  for (double s : c.data.norm.stddev)
    if (!(s > 0.0)) throw ConfigError("data.std", "must be positive");
  if (c.data.kind == "idx" && (c.data.train_images.empty() || c.data.train_labels.empty())) {
    throw ConfigError("data.train_images", "idx data needs train_images and train_labels");
  }
  if (c.data.kind == "cifar" && c.data.train_file.empty()) {
    throw ConfigError("data.train_file", "cifar data needs train_file");
  }
  if (c.data.kind == "synth" && c.data.train_count < 2) {
    throw ConfigError("data.train_count", "synthetic data needs at least 2 samples");
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text,
                                         const std::vector<std::string>& overrides) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()), e.message());
  }
  ExperimentConfig cfg = defaults();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(section, "key outside of a [section]");
    }
    for (const auto& [key, value] : body) apply(cfg, section + "." + key, value.data());
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(o, "override must look like section.key=value");
    apply(cfg, trim(o.substr(0, eq)), o.substr(eq + 1));
  }
  finalize(cfg);
  return cfg;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) { return parse(text, {}); }

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const std::vector<std::pair<std::string, std::string>>& ExperimentConfig::documented_keys() {
  static const std::vector<std::pair<std::string, std::string>> docs = [] {
    std::vector<std::pair<std::string, std::string>> d;
    for (const KeySpec& k : key_specs()) d.emplace_back(k.key, k.help);
    return d;
  }();
  return docs;
}

}  // namespace dietsnn
