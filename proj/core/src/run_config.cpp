#include "amber/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "amber/volume_io.hpp"

namespace amber {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& what, const std::string& value) {
  throw ConfigError(key + ": " + what + ", got '" + value + "'");
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    bad(key, "expected a non-negative integer", v);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  const auto t = trim(v);
  try {
    std::size_t pos = 0;
    const double d = std::stod(t, &pos);
    if (pos != t.size() || !std::isfinite(d)) bad(key, "expected a finite number", v);
    return d;
  } catch (const std::logic_error&) {
    bad(key, "expected a finite number", v);
  }
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
  return out;
}

StageArray to_stages(const std::string& key, const std::string& v) {
  const auto items = split(v, ',');
  if (items.size() != kNumStages) bad(key, "expected 4 comma-separated integers", v);
  StageArray out{};
  for (std::size_t i = 0; i < kNumStages; ++i) out[i] = to_uint(key, items[i]);
  return out;
}

template <typename T>
std::string join(const T& values, const char* sep = ",") {
  std::ostringstream os;
  bool first = true;
  for (const auto& v : values) {
    os << (first ? "" : sep) << v;
    first = false;
  }
  return os.str();
}

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Every recognised key; parsing rejects anything else.
const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"run", {"seed", "precision"}},
      {"model",
       {"in_channels", "dims", "depths", "strides", "merge_kernel", "merge_padding", "mixing",
        "afno_blocks", "shrink_threshold", "hidden_multiplier", "kept_modes", "mhsa_heads",
        "max_tokens", "ffn_expansion", "decoder_dim", "num_classes", "norm_eps"}},
      {"train",
       {"learning_rate", "momentum", "weight_decay", "epochs", "batch_size", "max_steps",
        "supervision_weights", "loss_epsilon"}},
      {"data",
       {"dir", "count", "train_fraction", "grid", "num_classes", "shape", "min_count",
        "max_count", "min_radius", "max_radius", "class_mean", "class_sigma", "noise_sigma",
        "spacing"}},
      {"bench", {"shapes", "repetitions", "batch"}},
      {"stats", {"input", "sweep_max_log2"}},
  };
  return s;
}

}  // namespace

Extent3 parse_extent(const std::string& text) {
  auto items = split(text, 'x');
  if (items.size() == 1) items = split(text, ',');
  if (items.size() != 3) bad("extent", "expected DxHxW", text);
  return {to_uint("extent", items[0]), to_uint("extent", items[1]), to_uint("extent", items[2])};
}

std::string extent_string(const Extent3& e) {
  return std::to_string(e.d) + "x" + std::to_string(e.h) + "x" + std::to_string(e.w);
}

std::pair<std::string, std::string> parse_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || assignment.find('.') > eq) {
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  }
  return {trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1))};
}

RunConfig parse_run_config(const std::string& ini_text, const ConfigOverrides& overrides) {
  pt::ptree tree;
  try {
    std::istringstream in(ini_text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  for (const auto& [key, value] : overrides) tree.put(pt::ptree::path_type(key, '.'), value);

  for (const auto& [section, body] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) throw ConfigError("unknown config section [" + section + "]");
    if (!body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    for (const auto& [key, unused] : body) {
      (void)unused;
      if (!it->second.count(key)) throw ConfigError("unknown config key " + section + "." + key);
    }
  }

  RunConfig c;
  auto get = [&](const std::string& section, const std::string& key,
                 auto&& apply) {
    const auto v = tree.get_optional<std::string>(pt::ptree::path_type(section + "." + key, '.'));
    if (v) {
      const std::string full = section + "." + key;
      apply(full, *v);
    }
  };
  auto as_size = [](std::size_t& out) {
    return [&out](const std::string& k, const std::string& v) { out = to_uint(k, v); };
  };
  auto as_double = [](double& out) {
    return [&out](const std::string& k, const std::string& v) { out = to_double(k, v); };
  };
  auto as_stages = [](StageArray& out) {
    return [&out](const std::string& k, const std::string& v) { out = to_stages(k, v); };
  };

  get("run", "seed", [&](auto& k, auto& v) { c.seed = to_uint(k, v); });
  get("run", "precision", [&](auto& k, auto& v) { c.precision = static_cast<int>(to_uint(k, v)); });

  ModelConfig& m = c.model;
  get("model", "in_channels", as_size(m.in_channels));
  get("model", "dims", as_stages(m.dims));
  get("model", "depths", as_stages(m.depths));
  get("model", "strides", as_stages(m.strides));
  get("model", "merge_kernel", as_size(m.merge_kernel));
  get("model", "merge_padding", as_size(m.merge_padding));
  get("model", "mixing", [&](auto& k, auto& v) {
    try {
      m.mixing = parse_mixing(trim(v));
    } catch (const ConfigError&) {
      bad(k, "expected afno or mhsa", v);
    }
  });
  get("model", "afno_blocks", as_stages(m.afno_blocks));
  get("model", "shrink_threshold", as_double(m.shrink_threshold));
  get("model", "hidden_multiplier", as_size(m.hidden_multiplier));
  get("model", "kept_modes", as_size(m.kept_modes));
  get("model", "mhsa_heads", as_stages(m.mhsa_heads));
  get("model", "max_tokens", as_size(m.max_tokens));
  get("model", "ffn_expansion", as_size(m.ffn_expansion));
  get("model", "decoder_dim", as_size(m.decoder_dim));
  get("model", "num_classes", as_size(m.num_classes));
  get("model", "norm_eps", as_double(m.norm_eps));

  TrainConfig& t = c.train;
  get("train", "learning_rate", as_double(t.sgd.learning_rate));
  get("train", "momentum", as_double(t.sgd.momentum));
  get("train", "weight_decay", as_double(t.sgd.weight_decay));
  get("train", "epochs", as_size(t.epochs));
  get("train", "batch_size", as_size(t.batch_size));
  get("train", "max_steps", as_size(t.max_steps));
  get("train", "supervision_weights",
      [&](auto& k, auto& v) { t.supervision_weights = to_doubles(k, v); });
  get("train", "loss_epsilon", as_double(t.loss_epsilon));

  DataConfig& d = c.data;
  PhantomSpec& ps = d.phantom;
  ps.num_classes = m.num_classes;
  get("data", "dir", [&](auto&, auto& v) { d.dir = trim(v); });
  get("data", "count", as_size(d.count));
  get("data", "train_fraction", as_double(d.train_fraction));
  get("data", "grid", [&](auto& k, auto& v) {
    try {
      ps.grid = parse_extent(v);
    } catch (const ConfigError&) {
      bad(k, "expected DxHxW", v);
    }
  });
  get("data", "num_classes", as_size(ps.num_classes));
  ClassShapes shapes;
  get("data", "shape", [&](auto& k, auto& v) {
    try {
      shapes.kind = parse_shape_kind(trim(v));
    } catch (const ConfigError&) {
      bad(k, "expected ellipsoid, box or tube", v);
    }
  });
  get("data", "min_count", as_size(shapes.min_count));
  get("data", "max_count", as_size(shapes.max_count));
  get("data", "min_radius", as_double(shapes.min_radius));
  get("data", "max_radius", as_double(shapes.max_radius));
  ps.classes.assign(ps.num_classes >= 2 ? ps.num_classes - 1 : 0, shapes);
  ps.class_mean.clear();
  ps.class_sigma.assign(ps.num_classes, 0.0);
  for (std::size_t k = 0; k < ps.num_classes; ++k) ps.class_mean.push_back(static_cast<double>(k));
  get("data", "class_mean", [&](auto& k, auto& v) { ps.class_mean = to_doubles(k, v); });
  get("data", "class_sigma", [&](auto& k, auto& v) { ps.class_sigma = to_doubles(k, v); });
  get("data", "noise_sigma", as_double(ps.noise_sigma));
  get("data", "spacing", [&](auto& k, auto& v) {
    const auto s = to_doubles(k, v);
    if (s.size() != 3) bad(k, "expected 3 comma-separated numbers", v);
    d.spacing = {s[0], s[1], s[2]};
  });

  get("bench", "shapes", [&](auto& k, auto& v) {
    c.bench.shapes.clear();
    for (const auto& item : split(v, ';')) {
      try {
        c.bench.shapes.push_back(parse_extent(item));
      } catch (const ConfigError&) {
        bad(k, "expected DxHxW;DxHxW;...", v);
      }
    }
  });
  get("bench", "repetitions", as_size(c.bench.repetitions));
  get("bench", "batch", as_size(c.bench.batch));
  get("stats", "input", [&](auto& k, auto& v) {
    try {
      c.stats.input = parse_extent(v);
    } catch (const ConfigError&) {
      bad(k, "expected DxHxW", v);
    }
  });
  get("stats", "sweep_max_log2", as_size(c.stats.sweep_max_log2));
  c.train.seed = c.seed;
  ps.seed = c.seed;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  return parse_run_config(read_file(path), overrides);
}

void RunConfig::validate() const {
  if (precision != 32 && precision != 64) throw ConfigError("run.precision must be 32 or 64");
  model.validate();
  train.validate();
  if (data.count < 1) throw ConfigError("data.count must be >= 1");
  if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
    throw ConfigError("data.train_fraction must be in (0, 1)");
  }
  for (double s : data.spacing)
    if (!(s > 0.0)) throw ConfigError("data.spacing entries must be > 0");
  if (data.phantom.num_classes != model.num_classes) {
    throw ConfigError("data.num_classes (" + std::to_string(data.phantom.num_classes) +
                      ") must equal model.num_classes (" + std::to_string(model.num_classes) +
                      ")");
  }
  try {
    data.phantom.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()));
  }
  model.validate_input(data.phantom.grid);
  if (bench.repetitions < 5) throw ConfigError("bench.repetitions must be >= 5");
  if (bench.batch < 1) throw ConfigError("bench.batch must be >= 1");
  if (bench.shapes.empty()) throw ConfigError("bench.shapes must list at least one shape");
  if (stats.sweep_max_log2 < 1 || stats.sweep_max_log2 > 8) {
    throw ConfigError("stats.sweep_max_log2 must be in [1, 8]");
  }
  model.validate_input(stats.input);
}

std::string render_run_config(const RunConfig& c) {
  const ModelConfig& m = c.model;
  const TrainConfig& t = c.train;
  const PhantomSpec& ps = c.data.phantom;
  const ClassShapes shapes = ps.classes.empty() ? ClassShapes{} : ps.classes.front();
  std::vector<std::string> bench_shapes;
  for (const auto& e : c.bench.shapes) bench_shapes.push_back(extent_string(e));
  std::vector<std::string> sw;
  for (double w : t.supervision_weights) sw.push_back(num(w));
  std::vector<std::string> means, sigmas;
  for (double v : ps.class_mean) means.push_back(num(v));
  for (double v : ps.class_sigma) sigmas.push_back(num(v));

  std::ostringstream os;
  os << "[run]\n"
     << "seed = " << c.seed << "\n"
     << "precision = " << c.precision << "\n\n"
     << "[model]\n"
     << "in_channels = " << m.in_channels << "\n"
     << "dims = " << join(m.dims) << "\n"
     << "depths = " << join(m.depths) << "\n"
     << "strides = " << join(m.strides) << "\n"
     << "merge_kernel = " << m.merge_kernel << "\n"
     << "merge_padding = " << m.merge_padding << "\n"
     << "mixing = " << mixing_name(m.mixing) << "\n"
     << "afno_blocks = " << join(m.afno_blocks) << "\n"
     << "shrink_threshold = " << num(m.shrink_threshold) << "\n"
     << "hidden_multiplier = " << m.hidden_multiplier << "\n"
     << "kept_modes = " << m.kept_modes << "\n"
     << "mhsa_heads = " << join(m.mhsa_heads) << "\n"
     << "max_tokens = " << m.max_tokens << "\n"
     << "ffn_expansion = " << m.ffn_expansion << "\n"
     << "decoder_dim = " << m.decoder_dim << "\n"
     << "num_classes = " << m.num_classes << "\n"
     << "norm_eps = " << num(m.norm_eps) << "\n\n"
     << "[train]\n"
     << "learning_rate = " << num(t.sgd.learning_rate) << "\n"
     << "momentum = " << num(t.sgd.momentum) << "\n"
     << "weight_decay = " << num(t.sgd.weight_decay) << "\n"
     << "epochs = " << t.epochs << "\n"
     << "batch_size = " << t.batch_size << "\n"
     << "max_steps = " << t.max_steps << "\n"
     << "supervision_weights = " << join(sw) << "\n"
     << "loss_epsilon = " << num(t.loss_epsilon) << "\n\n"
     << "[data]\n"
     << "dir = " << c.data.dir << "\n"
     << "count = " << c.data.count << "\n"
     << "train_fraction = " << num(c.data.train_fraction) << "\n"
     << "grid = " << extent_string(ps.grid) << "\n"
     << "num_classes = " << ps.num_classes << "\n"
     << "shape = " << shape_kind_name(shapes.kind) << "\n"
     << "min_count = " << shapes.min_count << "\n"
     << "max_count = " << shapes.max_count << "\n"
     << "min_radius = " << num(shapes.min_radius) << "\n"
     << "max_radius = " << num(shapes.max_radius) << "\n"
     << "class_mean = " << join(means) << "\n"
     << "class_sigma = " << join(sigmas) << "\n"
     << "noise_sigma = " << num(ps.noise_sigma) << "\n"
     << "spacing = " << num(c.data.spacing[0]) << "," << num(c.data.spacing[1]) << ","
     << num(c.data.spacing[2]) << "\n\n"
     << "[bench]\n"
     << "shapes = " << join(bench_shapes, ";") << "\n"
     << "repetitions = " << c.bench.repetitions << "\n"
     << "batch = " << c.bench.batch << "\n\n"
     << "[stats]\n"
     << "input = " << extent_string(c.stats.input) << "\n"
     << "sweep_max_log2 = " << c.stats.sweep_max_log2 << "\n";
  return os.str();
}

}  // namespace amber
