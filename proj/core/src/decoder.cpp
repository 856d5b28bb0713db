#include "amber/decoder.hpp"

#include <string>

namespace amber {

template <typename T>
Decoder<T>::Decoder(ParameterStore<T>& store, const ModelConfig& config) : config_(config) {
  config.validate();
  const std::size_t d = config.decoder_dim, n = config.num_classes;
  for (std::size_t i = 0; i < kNumStages; ++i) {
    proj_.emplace_back(store, "decoder.proj" + std::to_string(i),
                       ConvSpec::cube(1, 1, 0, config.dims[i], d));
  }
  fuse_ = ConvLayer<T>(store, "decoder.fuse", ConvSpec::cube(1, 1, 0, kNumStages * d, d));
  bn_ = BatchNormLayer<T>(store, "decoder.fuse_bn", d, T(config.norm_eps));
  const std::size_t s = config.strides[0];
  up_ = ConvLayer<T>(store, "decoder.up", ConvSpec::cube(s, s, 0, d, n), true);
  head_ = ConvLayer<T>(store, "decoder.head", ConvSpec::cube(1, 1, 0, n, n));
  for (std::size_t i = 0; i < kNumStages; ++i) {
    aux_.emplace_back(store, "decoder.aux" + std::to_string(i), ConvSpec::cube(1, 1, 0, d, n));
  }
}

template <typename T>
DecoderOutput<T> Decoder<T>::forward(const std::vector<Volume<T>>& features, bool training,
                                     DecoderCache<T>* cache) {
  if (features.size() != kNumStages) {
    throw ConfigError("decoder expects 4 features, got " + std::to_string(features.size()));
  }
  const Extent3 finest = spatial(features[0].shape());
  for (std::size_t i = 1; i < kNumStages; ++i) {
    const Extent3 e = spatial(features[i].shape());
    if (e.d > finest.d || e.h > finest.h || e.w > finest.w) {
      throw ConfigError("decoder scale ladder: feature " + std::to_string(i) + " extent " +
                        e.str() + " exceeds finest " + finest.str());
    }
  }
  DecoderOutput<T> out;
  std::vector<Volume<T>> projected, upsampled;
  for (std::size_t i = 0; i < kNumStages; ++i) {
    projected.push_back(proj_[i].forward(features[i]));
    out.aux.push_back(aux_[i].forward(projected.back()));
    upsampled.push_back(upsample_trilinear(projected.back(), finest));
  }
  Volume<T> fused_in = concat_channels<T>(upsampled);
  Volume<T> fused_act = relu(fuse_.forward(fused_in));
  Volume<T> normed = bn_.forward(fused_act, training, cache ? &cache->bn : nullptr);
  Volume<T> up = up_.forward(normed);
  out.logits = head_.forward(up);
  if (cache) {
    cache->features = features;
    cache->projected = std::move(projected);
    cache->fused_in = std::move(fused_in);
    cache->fused_act = std::move(fused_act);
    cache->normed = std::move(normed);
    cache->upsampled = std::move(up);
    cache->training = training;
  }
  return out;
}

template <typename T>
std::vector<Volume<T>> Decoder<T>::backward(const DecoderCache<T>& cache,
                                            const Volume<T>& grad_logits,
                                            const std::vector<Volume<T>>& grad_aux) {
  Volume<T> g = head_.backward(cache.upsampled, grad_logits);
  g = up_.backward(cache.normed, g);
  g = bn_.backward(cache.bn, g, cache.training);
  g = relu_backward(cache.fused_act, g);
  g = fuse_.backward(cache.fused_in, g);
  std::vector<std::size_t> widths(kNumStages, config_.decoder_dim);
  std::vector<Volume<T>> g_up = split_channels(g, widths);
  std::vector<Volume<T>> g_features;
  for (std::size_t i = 0; i < kNumStages; ++i) {
    Volume<T> gp = upsample_trilinear_backward(g_up[i], cache.projected[i].shape());
    if (!grad_aux.empty()) add_inplace(gp, aux_[i].backward(cache.projected[i], grad_aux[i]));
    g_features.push_back(proj_[i].backward(cache.features[i], gp));
  }
  return g_features;
}

template class Decoder<float>;
template class Decoder<double>;

}  // namespace amber
