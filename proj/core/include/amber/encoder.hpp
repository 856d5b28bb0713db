#pragma once

#include <string>
#include <vector>

#include "amber/layers.hpp"
#include "amber/model_config.hpp"

namespace amber {

template <typename T>
struct BlockCache {
  Volume<T> input;
  NormCache<T> norm1;
  MixingCache<T> mixing;
  Volume<T> mid;  // input + mixing branch
  NormCache<T> norm2;
  MixFfnCache<T> ffn;
};

/// Pre-norm transformer block: x1 = x + mix(LN1 x), out = x1 + ffn(LN2 x1).
template <typename T>
class EncoderBlock {
 public:
  EncoderBlock() = default;
  EncoderBlock(ParameterStore<T>& store, const std::string& prefix, const ModelConfig& config,
               std::size_t stage);

  Volume<T> forward(const Volume<T>& x, BlockCache<T>* cache) const;
  Volume<T> backward(const BlockCache<T>& cache, const Volume<T>& grad_out);

 private:
  LayerNormLayer<T> norm1_, norm2_;
  MixingLayer<T> mixing_;
  MixFfn<T> ffn_;
};

template <typename T>
struct StageCache {
  Volume<T> input;
  NormCache<T> merge_norm;
  std::vector<BlockCache<T>> blocks;
};

/// Overlapped patch merge (strided conv + layer norm) followed by `depth` blocks.
template <typename T>
class EncoderStage {
 public:
  EncoderStage() = default;
  EncoderStage(ParameterStore<T>& store, const ModelConfig& config, std::size_t stage);

  Volume<T> patch_merge(const Volume<T>& x, StageCache<T>* cache) const;
  Volume<T> forward(const Volume<T>& x, StageCache<T>* cache) const;
  Volume<T> backward(const StageCache<T>& cache, const Volume<T>& grad_out);

 private:
  ConvLayer<T> merge_;
  LayerNormLayer<T> merge_norm_;
  std::vector<EncoderBlock<T>> blocks_;
};

template <typename T>
using EncoderCache = std::array<StageCache<T>, kNumStages>;

template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(ParameterStore<T>& store, const ModelConfig& config);

  /// One feature volume per stage, finest first.
  std::vector<Volume<T>> forward(const Volume<T>& x, EncoderCache<T>* cache) const;
  /// Accumulates parameter gradients given dL/d(feature_i); returns dL/d(input).
  Volume<T> backward(const EncoderCache<T>& cache, const std::vector<Volume<T>>& grad_features);

 private:
  std::vector<EncoderStage<T>> stages_;
};

}  // namespace amber
