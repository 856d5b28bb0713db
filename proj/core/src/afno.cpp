#include "amber/afno.hpp"

#include <string>

namespace amber {

void AfnoConfig::validate() const {
  if (channels < 1) throw ConfigError("afno: channels must be >= 1");
  if (num_blocks < 1 || channels % num_blocks != 0) {
    throw ConfigError("afno: num_blocks " + std::to_string(num_blocks) +
                      " must divide channels " + std::to_string(channels));
  }
  if (!(shrink_threshold >= 0.0)) throw ConfigError("afno: shrink_threshold must be >= 0");
  if (hidden_multiplier < 1) throw ConfigError("afno: hidden_multiplier must be >= 1");
}

std::size_t afno_parameter_count(const AfnoConfig& config) {
  const std::size_t k = config.num_blocks, cb = config.block_width(), hb = config.hidden_width();
  return 2 * (k * cb * hb + k * hb + k * hb * cb + k * cb);
}

template <typename T>
AfnoWeights<T> AfnoWeights<T>::zeros(const AfnoConfig& config) {
  config.validate();
  const std::size_t k = config.num_blocks, cb = config.block_width(), hb = config.hidden_width();
  AfnoWeights<T> w;
  w.w1.assign(k * cb * hb, {});
  w.b1.assign(k * hb, {});
  w.w2.assign(k * hb * cb, {});
  w.b2.assign(k * cb, {});
  return w;
}

template <typename T>
void AfnoWeights<T>::check(const AfnoConfig& config) const {
  const std::size_t k = config.num_blocks, cb = config.block_width(), hb = config.hidden_width();
  if (w1.size() != k * cb * hb || b1.size() != k * hb || w2.size() != k * hb * cb ||
      b2.size() != k * cb) {
    throw ConfigError("afno: weight sizes do not match K=" + std::to_string(k) +
                      ", block width " + std::to_string(cb) + ", hidden " + std::to_string(hb));
  }
}

template <typename T>
BlockedSpectrum<T> partition_blocks(const ComplexVolume<T>& spectrum, std::size_t num_blocks) {
  const Shape5& s = spectrum.shape();
  if (num_blocks < 1 || s.c % num_blocks != 0) {
    throw ConfigError("partition_blocks: channel count " + std::to_string(s.c) +
                      " is not divisible by " + std::to_string(num_blocks) + " blocks");
  }
  return BlockedSpectrum<T>{s, num_blocks, spectrum.storage()};
}

template <typename T>
ComplexVolume<T> merge_blocks(const BlockedSpectrum<T>& blocked) {
  return ComplexVolume<T>(blocked.shape, blocked.data);
}

template <typename T>
BlockedSpectrum<T> block_mlp(const BlockedSpectrum<T>& x, const AfnoConfig& config,
                             const AfnoWeights<T>& weights, BlockMlpCache<T>* cache) {
  config.validate();
  weights.check(config);
  if (x.shape.c != config.channels || x.blocks != config.num_blocks) {
    throw ConfigError("block_mlp: spectrum has " + std::to_string(x.shape.c) + " channels in " +
                      std::to_string(x.blocks) + " blocks, config expects " +
                      std::to_string(config.channels) + " in " + std::to_string(config.num_blocks));
  }
  const std::size_t k = config.num_blocks, cb = config.block_width(), hb = config.hidden_width();
  const std::size_t positions = x.positions();
  BlockedSpectrum<T> y{x.shape, k, std::vector<std::complex<T>>(x.data.size())};
  std::vector<std::complex<T>> hidden(hb);
  if (cache) {
    cache->input = x;
    cache->hidden_pre.assign(positions * k * hb, {});
  }
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t i = 0; i < k; ++i) {
      const std::complex<T>* xin = &x.data[(p * k + i) * cb];
      for (std::size_t j = 0; j < hb; ++j) hidden[j] = weights.b1[i * hb + j];
      for (std::size_t c = 0; c < cb; ++c) {
        const std::complex<T> xv = xin[c];
        const std::complex<T>* wr = &weights.w1[(i * cb + c) * hb];
        for (std::size_t j = 0; j < hb; ++j) hidden[j] += xv * wr[j];
      }
      if (cache) std::copy(hidden.begin(), hidden.end(), &cache->hidden_pre[(p * k + i) * hb]);
      std::complex<T>* out = &y.data[(p * k + i) * cb];
      for (std::size_t c = 0; c < cb; ++c) out[c] = weights.b2[i * cb + c];
      for (std::size_t j = 0; j < hb; ++j) {
        const std::complex<T> a{hidden[j].real() > T(0) ? hidden[j].real() : T(0),
                                hidden[j].imag() > T(0) ? hidden[j].imag() : T(0)};
        if (a == std::complex<T>{}) continue;
        const std::complex<T>* wr = &weights.w2[(i * hb + j) * cb];
        for (std::size_t c = 0; c < cb; ++c) out[c] += a * wr[c];
      }
    }
  return y;
}

template <typename T>
BlockMlpGrads<T> block_mlp_backward(const BlockMlpCache<T>& cache, const AfnoConfig& config,
                                    const AfnoWeights<T>& weights,
                                    const BlockedSpectrum<T>& grad_out) {
  const std::size_t k = config.num_blocks, cb = config.block_width(), hb = config.hidden_width();
  const BlockedSpectrum<T>& x = cache.input;
  const std::size_t positions = x.positions();
  BlockMlpGrads<T> g{BlockedSpectrum<T>{x.shape, k, std::vector<std::complex<T>>(x.data.size())},
                     AfnoWeights<T>::zeros(config)};
  std::vector<std::complex<T>> act(hb), gh(hb);
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t i = 0; i < k; ++i) {
      const std::complex<T>* h = &cache.hidden_pre[(p * k + i) * hb];
      for (std::size_t j = 0; j < hb; ++j)
        act[j] = {h[j].real() > T(0) ? h[j].real() : T(0), h[j].imag() > T(0) ? h[j].imag() : T(0)};
      const std::complex<T>* go = &grad_out.data[(p * k + i) * cb];
      for (std::size_t c = 0; c < cb; ++c) g.weights.b2[i * cb + c] += go[c];
      for (std::size_t j = 0; j < hb; ++j) {
        const std::complex<T>* wr = &weights.w2[(i * hb + j) * cb];
        std::complex<T>* gwr = &g.weights.w2[(i * hb + j) * cb];
        const std::complex<T> ca = std::conj(act[j]);
        std::complex<T> acc{};
        for (std::size_t c = 0; c < cb; ++c) {
          acc += go[c] * std::conj(wr[c]);
          gwr[c] += go[c] * ca;
        }
        gh[j] = {h[j].real() > T(0) ? acc.real() : T(0), h[j].imag() > T(0) ? acc.imag() : T(0)};
        g.weights.b1[i * hb + j] += gh[j];
      }
      const std::complex<T>* xin = &x.data[(p * k + i) * cb];
      std::complex<T>* gx = &g.input.data[(p * k + i) * cb];
      for (std::size_t c = 0; c < cb; ++c) {
        const std::complex<T>* wr = &weights.w1[(i * cb + c) * hb];
        std::complex<T>* gwr = &g.weights.w1[(i * cb + c) * hb];
        const std::complex<T> cx = std::conj(xin[c]);
        std::complex<T> acc{};
        for (std::size_t j = 0; j < hb; ++j) {
          acc += gh[j] * std::conj(wr[j]);
          gwr[j] += gh[j] * cx;
        }
        gx[c] = acc;
      }
    }
  return g;
}

template <typename T>
ComplexVolume<T> soft_shrink(const ComplexVolume<T>& spectrum, T lambda) {
  if (!(lambda >= T(0))) throw ConfigError("soft_shrink: lambda must be >= 0");
  ComplexVolume<T> y(spectrum.shape());
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    const std::complex<T> v = spectrum[i];
    y[i] = {soft_shrink_scalar(v.real(), lambda), soft_shrink_scalar(v.imag(), lambda)};
  }
  return y;
}

template <typename T>
ComplexVolume<T> soft_shrink_backward(const ComplexVolume<T>& pre_shrink, T lambda,
                                      const ComplexVolume<T>& grad_out) {
  ComplexVolume<T> g(pre_shrink.shape());
  for (std::size_t i = 0; i < pre_shrink.size(); ++i) {
    const std::complex<T> v = pre_shrink[i];
    const std::complex<T> go = grad_out[i];
    g[i] = {std::abs(v.real()) > lambda ? go.real() : T(0),
            std::abs(v.imag()) > lambda ? go.imag() : T(0)};
  }
  return g;
}

template <typename T>
void apply_mode_mask(ComplexVolume<T>& spectrum, const Extent3& dims, std::size_t kept_modes) {
  if (kept_modes == 0) return;
  const Shape5& s = spectrum.shape();
  auto freq = [](std::size_t k, std::size_t n) { return k <= n / 2 ? k : n - k; };
  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t d = 0; d < s.d; ++d)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t k = 0; k < s.w; ++k) {
          if (freq(d, dims.d) < kept_modes && freq(h, dims.h) < kept_modes && k < kept_modes)
            continue;
          std::complex<T>* p = &spectrum.at(b, d, h, k, 0);
          for (std::size_t c = 0; c < s.c; ++c) p[c] = {};
        }
}

template <typename T>
Volume<T> afno3d_branch(const Volume<T>& x, const AfnoConfig& config,
                        const AfnoWeights<T>& weights, AfnoCache<T>* cache) {
  config.validate();
  if (x.shape().c != config.channels) {
    throw ConfigError("afno3d: input has " + std::to_string(x.shape().c) +
                      " channels, config expects " + std::to_string(config.channels));
  }
  const Extent3 dims = spatial(x.shape());
  const FftPlan3<T> plan(dims);
  const BlockedSpectrum<T> blocked = partition_blocks(plan.rfft(x), config.num_blocks);
  BlockMlpCache<T>* mlp_cache = cache ? &cache->mlp : nullptr;
  ComplexVolume<T> mixed = merge_blocks(block_mlp(blocked, config, weights, mlp_cache));
  apply_mode_mask(mixed, dims, config.kept_modes);
  const T lambda = static_cast<T>(config.shrink_threshold);
  ComplexVolume<T> shrunk = soft_shrink(mixed, lambda);
  if (cache) {
    cache->dims = dims;
    cache->pre_shrink = std::move(mixed);
  }
  return plan.irfft(shrunk);
}

template <typename T>
Volume<T> afno3d_forward(const Volume<T>& x, const AfnoConfig& config,
                         const AfnoWeights<T>& weights) {
  Volume<T> y = afno3d_branch(x, config, weights);
  add_inplace(y, x);
  return y;
}

template <typename T>
AfnoGrads<T> afno3d_branch_backward(const AfnoCache<T>& cache, const AfnoConfig& config,
                                    const AfnoWeights<T>& weights, const Volume<T>& grad_out) {
  const FftPlan3<T> plan(cache.dims);
  ComplexVolume<T> g_shrunk = plan.irfft_adjoint(grad_out);
  ComplexVolume<T> g_mixed =
      soft_shrink_backward(cache.pre_shrink, static_cast<T>(config.shrink_threshold), g_shrunk);
  apply_mode_mask(g_mixed, cache.dims, config.kept_modes);
  BlockMlpGrads<T> mg =
      block_mlp_backward(cache.mlp, config, weights, partition_blocks(g_mixed, config.num_blocks));
  return AfnoGrads<T>{plan.rfft_adjoint(merge_blocks(mg.input)), std::move(mg.weights)};
}

#define AMBER_INSTANTIATE(T)                                                                    \
  template struct AfnoWeights<T>;                                                               \
  template BlockedSpectrum<T> partition_blocks<T>(const ComplexVolume<T>&, std::size_t);        \
  template ComplexVolume<T> merge_blocks<T>(const BlockedSpectrum<T>&);                         \
  template BlockedSpectrum<T> block_mlp<T>(const BlockedSpectrum<T>&, const AfnoConfig&,        \
                                           const AfnoWeights<T>&, BlockMlpCache<T>*);           \
  template BlockMlpGrads<T> block_mlp_backward<T>(const BlockMlpCache<T>&, const AfnoConfig&,   \
                                                  const AfnoWeights<T>&,                        \
                                                  const BlockedSpectrum<T>&);                   \
  template ComplexVolume<T> soft_shrink<T>(const ComplexVolume<T>&, T);                         \
  template ComplexVolume<T> soft_shrink_backward<T>(const ComplexVolume<T>&, T,                 \
                                                    const ComplexVolume<T>&);                   \
  template void apply_mode_mask<T>(ComplexVolume<T>&, const Extent3&, std::size_t);             \
  template Volume<T> afno3d_branch<T>(const Volume<T>&, const AfnoConfig&,                      \
                                      const AfnoWeights<T>&, AfnoCache<T>*);                    \
  template Volume<T> afno3d_forward<T>(const Volume<T>&, const AfnoConfig&,                     \
                                       const AfnoWeights<T>&);                                  \
  template AfnoGrads<T> afno3d_branch_backward<T>(const AfnoCache<T>&, const AfnoConfig&,       \
                                                  const AfnoWeights<T>&, const Volume<T>&);

AMBER_INSTANTIATE(float)
AMBER_INSTANTIATE(double)
#undef AMBER_INSTANTIATE

}  // namespace amber
