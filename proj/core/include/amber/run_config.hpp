#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "amber/model_config.hpp"
#include "amber/phantom.hpp"
#include "amber/trainer.hpp"

namespace amber {

struct DataConfig {
  /// Existing dataset directory; empty means generate phantoms from `phantom`.
  std::string dir;
  std::size_t count = 20;
  double train_fraction = 0.8;
  PhantomSpec phantom;
  Spacing spacing{1.0, 1.0, 1.0};
};

struct BenchConfig {
  std::vector<Extent3> shapes{{16, 16, 16}};
  std::size_t repetitions = 5;
  std::size_t batch = 1;
};

struct StatsConfig {
  Extent3 input{16, 16, 16};
  std::size_t sweep_max_log2 = 5;
};

/// Complete declarative run description, loaded from a sectioned key/value file.
struct RunConfig {
  std::uint64_t seed = 0;
  int precision = 32;
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  BenchConfig bench;
  StatsConfig stats;

  /// Rejects any field violating module invariants; throws ConfigError naming it.
  void validate() const;
};

/// `section.key=value` assignments applied on top of the file.
using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Parses INI text; unknown sections or keys are errors.
RunConfig parse_run_config(const std::string& ini_text, const ConfigOverrides& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});
/// Splits "section.key=value".
std::pair<std::string, std::string> parse_override(const std::string& assignment);

/// Full INI rendering; parse_run_config(render_run_config(c)) reproduces c.
std::string render_run_config(const RunConfig& config);

Extent3 parse_extent(const std::string& text);
std::string extent_string(const Extent3& e);

}  // namespace amber
