#include "amber/encoder.hpp"

namespace amber {

namespace {

std::string stage_prefix(std::size_t stage) { return "encoder.stage" + std::to_string(stage); }

}  // namespace

template <typename T>
EncoderBlock<T>::EncoderBlock(ParameterStore<T>& store, const std::string& prefix,
                              const ModelConfig& config, std::size_t stage) {
  const std::size_t c = config.dims[stage];
  const T eps = static_cast<T>(config.norm_eps);
  norm1_ = LayerNormLayer<T>(store, prefix + ".norm1", c, eps);
  mixing_ = MixingLayer<T>(store, prefix + ".mixing", config.mixing, config.afno_config(stage),
                           config.mhsa_config(stage));
  norm2_ = LayerNormLayer<T>(store, prefix + ".norm2", c, eps);
  ffn_ = MixFfn<T>(store, prefix + ".ffn", c, config.ffn_expansion);
}

template <typename T>
Volume<T> EncoderBlock<T>::forward(const Volume<T>& x, BlockCache<T>* cache) const {
  Volume<T> mid = add(x, mixing_.branch(norm1_.forward(x, cache ? &cache->norm1 : nullptr),
                                        cache ? &cache->mixing : nullptr));
  Volume<T> out = add(mid, ffn_.branch(norm2_.forward(mid, cache ? &cache->norm2 : nullptr),
                                       cache ? &cache->ffn : nullptr));
  if (cache) {
    cache->input = x;
    cache->mid = std::move(mid);
  }
  return out;
}

template <typename T>
Volume<T> EncoderBlock<T>::backward(const BlockCache<T>& cache, const Volume<T>& grad_out) {
  Volume<T> g_mid = grad_out;
  add_inplace(g_mid, norm2_.backward(cache.norm2, ffn_.branch_backward(cache.ffn, grad_out)));
  Volume<T> g_in = g_mid;
  add_inplace(g_in, norm1_.backward(cache.norm1, mixing_.branch_backward(cache.mixing, g_mid)));
  return g_in;
}

template <typename T>
EncoderStage<T>::EncoderStage(ParameterStore<T>& store, const ModelConfig& config,
                              std::size_t stage) {
  const std::string p = stage_prefix(stage);
  merge_ = ConvLayer<T>(store, p + ".merge", config.merge_spec(stage));
  merge_norm_ =
      LayerNormLayer<T>(store, p + ".merge_norm", config.dims[stage], T(config.norm_eps));
  for (std::size_t j = 0; j < config.depths[stage]; ++j) {
    blocks_.emplace_back(store, p + ".block" + std::to_string(j), config, stage);
  }
}

template <typename T>
Volume<T> EncoderStage<T>::patch_merge(const Volume<T>& x, StageCache<T>* cache) const {
  if (cache) cache->input = x;
  return merge_norm_.forward(merge_.forward(x), cache ? &cache->merge_norm : nullptr);
}

template <typename T>
Volume<T> EncoderStage<T>::forward(const Volume<T>& x, StageCache<T>* cache) const {
  Volume<T> h = patch_merge(x, cache);
  if (cache) cache->blocks.assign(blocks_.size(), BlockCache<T>{});
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    h = blocks_[j].forward(h, cache ? &cache->blocks[j] : nullptr);
  }
  return h;
}

template <typename T>
Volume<T> EncoderStage<T>::backward(const StageCache<T>& cache, const Volume<T>& grad_out) {
  Volume<T> g = grad_out;
  for (std::size_t j = blocks_.size(); j-- > 0;) g = blocks_[j].backward(cache.blocks[j], g);
  g = merge_norm_.backward(cache.merge_norm, g);
  return merge_.backward(cache.input, g);
}

template <typename T>
Encoder<T>::Encoder(ParameterStore<T>& store, const ModelConfig& config) {
  config.validate();
  for (std::size_t i = 0; i < kNumStages; ++i) stages_.emplace_back(store, config, i);
}

template <typename T>
std::vector<Volume<T>> Encoder<T>::forward(const Volume<T>& x, EncoderCache<T>* cache) const {
  std::vector<Volume<T>> features;
  features.reserve(kNumStages);
  const Volume<T>* h = &x;
  for (std::size_t i = 0; i < kNumStages; ++i) {
    features.push_back(stages_[i].forward(*h, cache ? &(*cache)[i] : nullptr));
    h = &features.back();
  }
  return features;
}

template <typename T>
Volume<T> Encoder<T>::backward(const EncoderCache<T>& cache,
                               const std::vector<Volume<T>>& grad_features) {
  if (grad_features.size() != kNumStages) throw ConfigError("encoder backward: need 4 gradients");
  Volume<T> g = grad_features[kNumStages - 1];
  for (std::size_t i = kNumStages; i-- > 0;) {
    if (i + 1 < kNumStages) add_inplace(g, grad_features[i]);
    g = stages_[i].backward(cache[i], g);
  }
  return g;
}

template class EncoderBlock<float>;
template class EncoderBlock<double>;
template class EncoderStage<float>;
template class EncoderStage<double>;
template class Encoder<float>;
template class Encoder<double>;

}  // namespace amber
