#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "amber/tensor.hpp"

namespace amber {

/// Cubic-or-not 3D convolution geometry. Stride and padding are uniform across axes.
struct ConvSpec {
  std::array<std::size_t, 3> kernel{1, 1, 1};
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t groups = 1;

  /// floor((extent + 2P - K) / S) + 1; throws ConfigError when < 1.
  Extent3 output_extent(const Extent3& in) const;
  /// (extent - 1) * S - 2P + K; throws ConfigError when < 1.
  Extent3 transposed_output_extent(const Extent3& in) const;
  std::size_t kernel_volume() const noexcept { return kernel[0] * kernel[1] * kernel[2]; }
  void validate() const;

  static ConvSpec cube(std::size_t k, std::size_t stride, std::size_t padding, std::size_t cin,
                       std::size_t cout, std::size_t groups = 1) {
    return ConvSpec{{k, k, k}, stride, padding, cin, cout, groups};
  }
};

/// Weight layout (Kd, Kh, Kw, Cin / groups, Cout).
std::vector<std::size_t> conv_weight_shape(const ConvSpec& spec);
/// Weight layout (Kd, Kh, Kw, Cout, Cin): the same tensor a forward conv Cout -> Cin would use.
std::vector<std::size_t> conv_transposed_weight_shape(const ConvSpec& spec);

template <typename T>
struct ConvGrads {
  Volume<T> input;
  Tensor<T> weight;
  std::vector<T> bias;
};

template <typename T>
Volume<T> conv3d(const Volume<T>& x, const Tensor<T>& weight, std::span<const T> bias,
                 const ConvSpec& spec);

template <typename T>
ConvGrads<T> conv3d_backward(const Volume<T>& x, const Tensor<T>& weight, const ConvSpec& spec,
                             const Volume<T>& grad_out);

/// Adjoint of conv3d with the same kernel. Only groups == 1 is supported.
template <typename T>
Volume<T> conv3d_transposed(const Volume<T>& x, const Tensor<T>& weight, std::span<const T> bias,
                            const ConvSpec& spec);

template <typename T>
ConvGrads<T> conv3d_transposed_backward(const Volume<T>& x, const Tensor<T>& weight,
                                        const ConvSpec& spec, const Volume<T>& grad_out);

/// Trilinear interpolation, align-corners-false, source index clamped at the low edge.
template <typename T>
Volume<T> upsample_trilinear(const Volume<T>& x, const Extent3& target);

template <typename T>
Volume<T> upsample_trilinear_backward(const Volume<T>& grad_out, const Shape5& input_shape);

template <typename T>
struct NormCache {
  Volume<T> normalized;         // x_hat
  std::vector<T> inv_std;       // per voxel (layer norm) or per channel (batch norm)
};

template <typename T>
struct NormGrads {
  Volume<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

/// Normalizes over the channel axis independently at every voxel.
template <typename T>
Volume<T> layer_norm(const Volume<T>& x, std::span<const T> gamma, std::span<const T> beta, T eps,
                     NormCache<T>* cache = nullptr);

template <typename T>
NormGrads<T> layer_norm_backward(const NormCache<T>& cache, std::span<const T> gamma,
                                 const Volume<T>& grad_out);

template <typename T>
struct BatchNormStats {
  std::vector<T> mean;
  std::vector<T> var;
  T momentum = T(0.1);
};

/// Per-channel normalization over (B, D, H, W). Training mode uses batch statistics
/// and updates `running` (unbiased variance); eval mode uses `running`.
template <typename T>
Volume<T> batch_norm3d(const Volume<T>& x, std::span<const T> gamma, std::span<const T> beta,
                       BatchNormStats<T>& running, T eps, bool training,
                       NormCache<T>* cache = nullptr);

template <typename T>
NormGrads<T> batch_norm3d_backward(const NormCache<T>& cache, std::span<const T> gamma,
                                   const Volume<T>& grad_out, bool training);

/// Exact form x * Phi(x).
template <typename T>
Volume<T> gelu(const Volume<T>& x);
template <typename T>
Volume<T> gelu_backward(const Volume<T>& x, const Volume<T>& grad_out);

template <typename T>
Volume<T> relu(const Volume<T>& x);
/// Gradient gated on the forward output (y > 0).
template <typename T>
Volume<T> relu_backward(const Volume<T>& y, const Volume<T>& grad_out);

template <typename T>
Volume<T> softmax_channels(const Volume<T>& logits);
/// Backward through softmax given its output probabilities.
template <typename T>
Volume<T> softmax_channels_backward(const Volume<T>& probs, const Volume<T>& grad_out);

template <typename T>
T gelu_scalar(T x);

}  // namespace amber
