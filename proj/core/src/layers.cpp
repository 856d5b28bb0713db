#include "amber/layers.hpp"

#include <algorithm>
#include <cstring>

namespace amber {

template <typename T>
void accumulate_grad(Parameter<T>& p, std::span<const T> delta) {
  auto g = p.grad.data();
  if (g.size() != delta.size()) {
    throw ConfigError("gradient size mismatch for '" + p.name + "'");
  }
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

namespace {

template <typename T>
std::span<const T> real_view(const std::vector<std::complex<T>>& v) {
  return {reinterpret_cast<const T*>(v.data()), 2 * v.size()};
}

template <typename T>
std::vector<std::complex<T>> complex_copy(const Parameter<T>& p) {
  std::vector<std::complex<T>> out(p.value.size() / 2);
  std::memcpy(static_cast<void*>(out.data()), p.value.data().data(), p.value.size() * sizeof(T));
  return out;
}

template <typename T>
std::vector<T> real_copy(const Parameter<T>& p) {
  return {p.value.data().begin(), p.value.data().end()};
}

}  // namespace

// ---------------------------------------------------------------- ConvLayer

template <typename T>
ConvLayer<T>::ConvLayer(ParameterStore<T>& store, const std::string& prefix, const ConvSpec& spec,
                        bool transposed)
    : spec_(spec), transposed_(transposed) {
  spec_.validate();
  const auto shape = transposed ? conv_transposed_weight_shape(spec) : conv_weight_shape(spec);
  // For the transpose, fan-in counts the input channels reaching one output voxel.
  const std::size_t fan_in = transposed
                                 ? spec.in_channels
                                 : spec.kernel_volume() * (spec.in_channels / spec.groups);
  weight_ = &store.add(prefix + ".weight", shape, InitKind::kaiming, fan_in);
  bias_ = &store.add(prefix + ".bias", {spec.out_channels}, InitKind::zeros);
}

template <typename T>
Volume<T> ConvLayer<T>::forward(const Volume<T>& x) const {
  std::span<const T> bias = bias_->value.data();
  return transposed_ ? conv3d_transposed(x, weight_->value, bias, spec_)
                     : conv3d(x, weight_->value, bias, spec_);
}

template <typename T>
Volume<T> ConvLayer<T>::backward(const Volume<T>& x, const Volume<T>& grad_out) {
  ConvGrads<T> g = transposed_ ? conv3d_transposed_backward(x, weight_->value, spec_, grad_out)
                               : conv3d_backward(x, weight_->value, spec_, grad_out);
  accumulate_grad<T>(*weight_, g.weight.data());
  accumulate_grad<T>(*bias_, g.bias);
  return std::move(g.input);
}

// ---------------------------------------------------------------- norms

template <typename T>
LayerNormLayer<T>::LayerNormLayer(ParameterStore<T>& store, const std::string& prefix,
                                  std::size_t channels, T eps)
    : eps_(eps) {
  gamma_ = &store.add(prefix + ".gamma", {channels}, InitKind::ones);
  beta_ = &store.add(prefix + ".beta", {channels}, InitKind::zeros);
}

template <typename T>
Volume<T> LayerNormLayer<T>::forward(const Volume<T>& x, NormCache<T>* cache) const {
  return layer_norm<T>(x, gamma_->value.data(), beta_->value.data(), eps_, cache);
}

template <typename T>
Volume<T> LayerNormLayer<T>::backward(const NormCache<T>& cache, const Volume<T>& grad_out) {
  NormGrads<T> g = layer_norm_backward<T>(cache, gamma_->value.data(), grad_out);
  accumulate_grad<T>(*gamma_, g.gamma);
  accumulate_grad<T>(*beta_, g.beta);
  return std::move(g.input);
}

template <typename T>
BatchNormLayer<T>::BatchNormLayer(ParameterStore<T>& store, const std::string& prefix,
                                  std::size_t channels, T eps)
    : eps_(eps) {
  gamma_ = &store.add(prefix + ".gamma", {channels}, InitKind::ones);
  beta_ = &store.add(prefix + ".beta", {channels}, InitKind::zeros);
  running_mean_ = &store.add_buffer(prefix + ".running_mean", {channels}, InitKind::zeros);
  running_var_ = &store.add_buffer(prefix + ".running_var", {channels}, InitKind::ones);
}

template <typename T>
Volume<T> BatchNormLayer<T>::forward(const Volume<T>& x, bool training, NormCache<T>* cache) {
  BatchNormStats<T> stats{real_copy(*running_mean_), real_copy(*running_var_)};
  Volume<T> y =
      batch_norm3d<T>(x, gamma_->value.data(), beta_->value.data(), stats, eps_, training, cache);
  if (training) {
    std::copy(stats.mean.begin(), stats.mean.end(), running_mean_->value.data().begin());
    std::copy(stats.var.begin(), stats.var.end(), running_var_->value.data().begin());
  }
  return y;
}

template <typename T>
Volume<T> BatchNormLayer<T>::backward(const NormCache<T>& cache, const Volume<T>& grad_out,
                                      bool training) {
  NormGrads<T> g = batch_norm3d_backward<T>(cache, gamma_->value.data(), grad_out, training);
  accumulate_grad<T>(*gamma_, g.gamma);
  accumulate_grad<T>(*beta_, g.beta);
  return std::move(g.input);
}

// ---------------------------------------------------------------- Mix-FFN

template <typename T>
MixFfn<T>::MixFfn(ParameterStore<T>& store, const std::string& prefix, std::size_t channels,
                  std::size_t expansion) {
  const std::size_t hidden = channels * expansion;
  fc1_ = ConvLayer<T>(store, prefix + ".fc1", ConvSpec::cube(1, 1, 0, channels, hidden));
  dw_ = ConvLayer<T>(store, prefix + ".dwconv", ConvSpec::cube(3, 1, 1, hidden, hidden, hidden));
  fc2_ = ConvLayer<T>(store, prefix + ".fc2", ConvSpec::cube(1, 1, 0, hidden, channels));
}

template <typename T>
Volume<T> MixFfn<T>::branch(const Volume<T>& x, MixFfnCache<T>* cache) const {
  Volume<T> lifted = fc1_.forward(x);
  Volume<T> mixed = dw_.forward(lifted);
  Volume<T> activated = gelu(mixed);
  Volume<T> out = fc2_.forward(activated);
  if (cache) {
    cache->input = x;
    cache->lifted = std::move(lifted);
    cache->mixed = std::move(mixed);
    cache->activated = std::move(activated);
  }
  return out;
}

template <typename T>
Volume<T> MixFfn<T>::forward(const Volume<T>& x) const {
  return add(branch(x, nullptr), x);
}

template <typename T>
Volume<T> MixFfn<T>::branch_backward(const MixFfnCache<T>& cache, const Volume<T>& grad_out) {
  Volume<T> g = fc2_.backward(cache.activated, grad_out);
  g = gelu_backward(cache.mixed, g);
  g = dw_.backward(cache.lifted, g);
  return fc1_.backward(cache.input, g);
}

// ---------------------------------------------------------------- mixing

const char* mixing_name(MixingKind kind) { return kind == MixingKind::afno ? "afno" : "mhsa"; }

MixingKind parse_mixing(const std::string& text) {
  if (text == "afno") return MixingKind::afno;
  if (text == "mhsa") return MixingKind::mhsa;
  throw ConfigError("mixing must be 'afno' or 'mhsa', got '" + text + "'");
}

template <typename T>
MixingLayer<T>::MixingLayer(ParameterStore<T>& store, const std::string& prefix, MixingKind kind,
                            const AfnoConfig& afno, const MhsaConfig& mhsa)
    : kind_(kind), afno_(afno), mhsa_(mhsa) {
  if (kind == MixingKind::afno) {
    afno_.validate();
    const std::size_t k = afno.num_blocks, cb = afno.block_width(), hb = afno.hidden_width();
    params_.push_back(&store.add(prefix + ".w1", {k, cb, hb}, InitKind::trunc_normal, 1, true));
    params_.push_back(&store.add(prefix + ".b1", {k, hb}, InitKind::zeros, 1, true));
    params_.push_back(&store.add(prefix + ".w2", {k, hb, cb}, InitKind::trunc_normal, 1, true));
    params_.push_back(&store.add(prefix + ".b2", {k, cb}, InitKind::zeros, 1, true));
  } else {
    mhsa_.validate();
    const std::size_t c = mhsa.channels;
    for (const char* n : {"q", "k", "v", "o"}) {
      params_.push_back(&store.add(prefix + ".w" + n, {c, c}, InitKind::trunc_normal));
      params_.push_back(&store.add(prefix + ".b" + n, {c}, InitKind::zeros));
    }
  }
}

template <typename T>
AfnoWeights<T> MixingLayer<T>::afno_weights() const {
  return {complex_copy(*params_[0]), complex_copy(*params_[1]), complex_copy(*params_[2]),
          complex_copy(*params_[3])};
}

template <typename T>
MhsaWeights<T> MixingLayer<T>::mhsa_weights() const {
  return {real_copy(*params_[0]), real_copy(*params_[1]), real_copy(*params_[2]),
          real_copy(*params_[3]), real_copy(*params_[4]), real_copy(*params_[5]),
          real_copy(*params_[6]), real_copy(*params_[7])};
}

template <typename T>
Volume<T> MixingLayer<T>::branch(const Volume<T>& x, MixingCache<T>* cache) const {
  if (kind_ == MixingKind::afno) {
    return afno3d_branch(x, afno_, afno_weights(), cache ? &cache->afno : nullptr);
  }
  return mhsa_forward(x, mhsa_, mhsa_weights(), cache ? &cache->mhsa : nullptr);
}

template <typename T>
Volume<T> MixingLayer<T>::branch_backward(const MixingCache<T>& cache, const Volume<T>& grad_out) {
  if (kind_ == MixingKind::afno) {
    AfnoGrads<T> g = afno3d_branch_backward(cache.afno, afno_, afno_weights(), grad_out);
    accumulate_grad<T>(*params_[0], real_view(g.weights.w1));
    accumulate_grad<T>(*params_[1], real_view(g.weights.b1));
    accumulate_grad<T>(*params_[2], real_view(g.weights.w2));
    accumulate_grad<T>(*params_[3], real_view(g.weights.b2));
    return std::move(g.input);
  }
  MhsaGrads<T> g = mhsa_backward(cache.mhsa, mhsa_, mhsa_weights(), grad_out);
  const std::vector<T>* parts[] = {&g.weights.wq, &g.weights.bq, &g.weights.wk, &g.weights.bk,
                                   &g.weights.wv, &g.weights.bv, &g.weights.wo, &g.weights.bo};
  for (std::size_t i = 0; i < 8; ++i) accumulate_grad<T>(*params_[i], *parts[i]);
  return std::move(g.input);
}

#define AMBER_INSTANTIATE(T)                                               \
  template void accumulate_grad<T>(Parameter<T>&, std::span<const T>);     \
  template class ConvLayer<T>;                                             \
  template class LayerNormLayer<T>;                                        \
  template class BatchNormLayer<T>;                                        \
  template class MixFfn<T>;                                                \
  template class MixingLayer<T>;

AMBER_INSTANTIATE(float)
AMBER_INSTANTIATE(double)

}  // namespace amber
