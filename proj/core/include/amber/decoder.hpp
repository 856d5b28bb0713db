#pragma once

#include <vector>

#include "amber/layers.hpp"
#include "amber/model_config.hpp"

namespace amber {

template <typename T>
struct DecoderCache {
  std::vector<Volume<T>> features;
  std::vector<Volume<T>> projected;
  Volume<T> fused_in;   // concatenated upsampled projections (4d channels)
  Volume<T> fused_act;  // ReLU(fuse conv)
  NormCache<T> bn;
  Volume<T> normed;     // batch norm output
  Volume<T> upsampled;  // transposed conv output at native resolution
  bool training = false;
};

template <typename T>
struct DecoderOutput {
  Volume<T> logits;              // (B, D, H, W, N_cls)
  std::vector<Volume<T>> aux;    // one per stage at that stage's resolution
};

/// All-MLP decoder: project, upsample to the finest scale, concat, fuse
/// (conv, ReLU, batch norm), transposed conv to native grid, final 1x1x1 conv.
template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(ParameterStore<T>& store, const ModelConfig& config);

  DecoderOutput<T> forward(const std::vector<Volume<T>>& features, bool training,
                           DecoderCache<T>* cache);
  /// Returns dL/d(feature_i); `grad_aux` may be empty (no deep supervision).
  std::vector<Volume<T>> backward(const DecoderCache<T>& cache, const Volume<T>& grad_logits,
                                  const std::vector<Volume<T>>& grad_aux);

 private:
  ModelConfig config_;
  std::vector<ConvLayer<T>> proj_;
  std::vector<ConvLayer<T>> aux_;
  ConvLayer<T> fuse_;
  BatchNormLayer<T> bn_;
  ConvLayer<T> up_;
  ConvLayer<T> head_;
};

}  // namespace amber
