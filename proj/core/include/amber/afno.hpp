#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "amber/fft.hpp"
#include "amber/tensor.hpp"

namespace amber {

/// Frequency-domain token mixer settings.
struct AfnoConfig {
  std::size_t channels = 0;
  std::size_t num_blocks = 1;
  /// Soft-shrink threshold applied to real and imaginary parts separately.
  double shrink_threshold = 0.01;
  std::size_t hidden_multiplier = 1;
  /// 0 keeps every mode; otherwise bins whose absolute frequency index reaches
  /// kept_modes on any axis are zeroed before shrinkage.
  std::size_t kept_modes = 0;

  std::size_t block_width() const { return channels / num_blocks; }
  std::size_t hidden_width() const { return hidden_multiplier * block_width(); }
  void validate() const;
};

/// Per-block complex MLP weights:
///   w1 (K, Cb, Hb), b1 (K, Hb), w2 (K, Hb, Cb), b2 (K, Cb), row-major.
template <typename T>
struct AfnoWeights {
  std::vector<std::complex<T>> w1;
  std::vector<std::complex<T>> b1;
  std::vector<std::complex<T>> w2;
  std::vector<std::complex<T>> b2;

  static AfnoWeights zeros(const AfnoConfig& config);
  void check(const AfnoConfig& config) const;
  /// Real scalars stored (2 per complex entry).
  std::size_t real_parameter_count() const {
    return 2 * (w1.size() + b1.size() + w2.size() + b2.size());
  }
};

/// Closed-form real parameter count 2 [K Cb Hb + K Hb + K Hb Cb + K Cb].
std::size_t afno_parameter_count(const AfnoConfig& config);

/// Half-spectrum viewed as (B, D, H, Wf, K, C / K). Same storage order as the
/// channel-innermost ComplexVolume, so partition and merge are pure reshapes.
template <typename T>
struct BlockedSpectrum {
  Shape5 shape;  // (B, D, H, Wf, C)
  std::size_t blocks = 1;
  std::vector<std::complex<T>> data;

  std::size_t block_width() const { return shape.c / blocks; }
  std::size_t positions() const { return shape.b * shape.d * shape.h * shape.w; }
};

template <typename T>
BlockedSpectrum<T> partition_blocks(const ComplexVolume<T>& spectrum, std::size_t num_blocks);

template <typename T>
ComplexVolume<T> merge_blocks(const BlockedSpectrum<T>& blocked);

template <typename T>
struct BlockMlpCache {
  BlockedSpectrum<T> input;
  std::vector<std::complex<T>> hidden_pre;  // (positions, K, Hb) before the split ReLU
};

/// out = W2 relu(W1 x + b1) + b2 per block, ReLU on real and imaginary parts separately.
template <typename T>
BlockedSpectrum<T> block_mlp(const BlockedSpectrum<T>& x, const AfnoConfig& config,
                             const AfnoWeights<T>& weights, BlockMlpCache<T>* cache = nullptr);

template <typename T>
struct BlockMlpGrads {
  BlockedSpectrum<T> input;
  AfnoWeights<T> weights;
};

/// Gradients use the dL/dRe + i dL/dIm convention for every complex quantity.
template <typename T>
BlockMlpGrads<T> block_mlp_backward(const BlockMlpCache<T>& cache, const AfnoConfig& config,
                                    const AfnoWeights<T>& weights,
                                    const BlockedSpectrum<T>& grad_out);

template <typename T>
T soft_shrink_scalar(T v, T lambda) {
  if (v > lambda) return v - lambda;
  if (v < -lambda) return v + lambda;
  return T(0);
}

template <typename T>
ComplexVolume<T> soft_shrink(const ComplexVolume<T>& spectrum, T lambda);

/// Passes gradient only where |component| > lambda (zero at the kink).
template <typename T>
ComplexVolume<T> soft_shrink_backward(const ComplexVolume<T>& pre_shrink, T lambda,
                                      const ComplexVolume<T>& grad_out);

/// Zeroes bins at or above `kept_modes` absolute frequency; no-op when kept_modes == 0.
template <typename T>
void apply_mode_mask(ComplexVolume<T>& spectrum, const Extent3& dims, std::size_t kept_modes);

template <typename T>
struct AfnoCache {
  Extent3 dims;
  BlockMlpCache<T> mlp;
  ComplexVolume<T> pre_shrink;
};

/// IRFFT3(SoftShrink(MLP(RFFT3(x)))) without the residual.
template <typename T>
Volume<T> afno3d_branch(const Volume<T>& x, const AfnoConfig& config,
                        const AfnoWeights<T>& weights, AfnoCache<T>* cache = nullptr);

/// Full block: afno3d_branch(x) + x.
template <typename T>
Volume<T> afno3d_forward(const Volume<T>& x, const AfnoConfig& config,
                         const AfnoWeights<T>& weights);

template <typename T>
struct AfnoGrads {
  Volume<T> input;
  AfnoWeights<T> weights;
};

/// Backward of afno3d_branch (residual excluded).
template <typename T>
AfnoGrads<T> afno3d_branch_backward(const AfnoCache<T>& cache, const AfnoConfig& config,
                                    const AfnoWeights<T>& weights, const Volume<T>& grad_out);

}  // namespace amber
