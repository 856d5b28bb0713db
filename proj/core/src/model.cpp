#include "amber/model.hpp"

namespace amber {

template <typename T>
SegmentationModel<T>::SegmentationModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), store_(std::make_unique<ParameterStore<T>>()) {
  config_.validate();
  encoder_ = Encoder<T>(*store_, config_);
  decoder_ = Decoder<T>(*store_, config_);
  store_->initialize(seed);
}

template <typename T>
ModelOutput<T> SegmentationModel<T>::forward(const Volume<T>& x, bool training,
                                             ModelCache<T>* cache) {
  if (x.shape().c != config_.in_channels) {
    throw ConfigError("model input has " + std::to_string(x.shape().c) + " channels, expected " +
                      std::to_string(config_.in_channels));
  }
  config_.validate_input(spatial(x.shape()));
  if (cache) cache->input_shape = x.shape();
  std::vector<Volume<T>> features = encoder_.forward(x, cache ? &cache->encoder : nullptr);
  DecoderOutput<T> d = decoder_.forward(features, training, cache ? &cache->decoder : nullptr);
  return {std::move(d.logits), std::move(d.aux)};
}

template <typename T>
std::vector<Volume<T>> SegmentationModel<T>::encode(const Volume<T>& x) const {
  config_.validate_input(spatial(x.shape()));
  return encoder_.forward(x, nullptr);
}

template <typename T>
Volume<T> SegmentationModel<T>::backward(const ModelCache<T>& cache, const Volume<T>& grad_logits,
                                         const std::vector<Volume<T>>& grad_aux) {
  std::vector<Volume<T>> g_features = decoder_.backward(cache.decoder, grad_logits, grad_aux);
  return encoder_.backward(cache.encoder, g_features);
}

template class SegmentationModel<float>;
template class SegmentationModel<double>;

}  // namespace amber
