#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "amber/decoder.hpp"
#include "amber/encoder.hpp"
#include "amber/model_config.hpp"
#include "amber/parameters.hpp"

namespace amber {

template <typename T>
struct ModelCache {
  Shape5 input_shape;
  EncoderCache<T> encoder;
  DecoderCache<T> decoder;
};

template <typename T>
struct ModelOutput {
  Volume<T> logits;
  std::vector<Volume<T>> aux;
};

/// Encoder + decoder with an owned parameter registry.
template <typename T>
class SegmentationModel {
 public:
  SegmentationModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore<T>& parameters() noexcept { return *store_; }
  const ParameterStore<T>& parameters() const noexcept { return *store_; }

  /// Training mode uses batch statistics in the fuse batch norm and updates its buffers.
  ModelOutput<T> forward(const Volume<T>& x, bool training, ModelCache<T>* cache = nullptr);
  std::vector<Volume<T>> encode(const Volume<T>& x) const;

  /// Accumulates dL/dθ into every parameter's grad; returns dL/dx.
  Volume<T> backward(const ModelCache<T>& cache, const Volume<T>& grad_logits,
                     const std::vector<Volume<T>>& grad_aux);

 private:
  ModelConfig config_;
  std::unique_ptr<ParameterStore<T>> store_;
  Encoder<T> encoder_;
  Decoder<T> decoder_;
};

}  // namespace amber
