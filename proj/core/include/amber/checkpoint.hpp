#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amber/model.hpp"

namespace amber {

struct TensorRecord {
  std::string name;
  std::vector<std::size_t> shape;  // logical shape; complex tensors store 2 scalars per entry
  bool complex = false;
  bool trainable = true;
  std::string dtype;  // "float32" or "float64"
  std::size_t offset = 0;
  std::size_t bytes = 0;
  std::string fnv1a64;
};

struct CheckpointManifest {
  ModelConfig config;
  long step = 0;
  std::vector<TensorRecord> tensors;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
/// Throws ConfigError on missing or ill-typed fields.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Writes manifest.json and params.bin (little-endian, in the model's precision).
template <typename T>
CheckpointManifest save_checkpoint(const std::filesystem::path& dir,
                                   const SegmentationModel<T>& model, long step = 0);

CheckpointManifest read_checkpoint_manifest(const std::filesystem::path& dir);

/// Copies tensors into an existing model. Throws ConfigError listing name/shape differences.
template <typename T>
void load_checkpoint(const std::filesystem::path& dir, SegmentationModel<T>& model);

/// Builds a model from the stored config and loads its tensors.
template <typename T>
std::unique_ptr<SegmentationModel<T>> load_model(const std::filesystem::path& dir,
                                                 CheckpointManifest* manifest = nullptr);

}  // namespace amber
