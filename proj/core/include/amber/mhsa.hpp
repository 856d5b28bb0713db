#pragma once

#include <cstddef>
#include <vector>

#include "amber/tensor.hpp"

namespace amber {

/// Standard multi-head self-attention over the flattened D*H*W token sequence.
struct MhsaConfig {
  std::size_t channels = 0;
  std::size_t heads = 1;
  /// Quadratic-memory guard on the token count.
  std::size_t max_tokens = 32768;

  std::size_t head_dim() const { return channels / heads; }
  void validate() const;
};

/// Projections act on row vectors: q = x Wq + bq with Wq stored (C_in, C_out) row-major.
template <typename T>
struct MhsaWeights {
  std::vector<T> wq, bq, wk, bk, wv, bv, wo, bo;

  static MhsaWeights zeros(const MhsaConfig& config);
  void check(const MhsaConfig& config) const;
};

/// 4 C^2 + 4 C.
std::size_t mhsa_parameter_count(const MhsaConfig& config);

template <typename T>
struct MhsaCache {
  Shape5 shape;
  std::vector<T> x, q, k, v;   // (B, L, C)
  std::vector<T> attn;         // (B, heads, L, L), softmax rows
  std::vector<T> context;      // (B, L, C)
};

/// Returns o = softmax(Q K^T / sqrt(d_h)) V projected by Wo (no residual).
template <typename T>
Volume<T> mhsa_forward(const Volume<T>& x, const MhsaConfig& config, const MhsaWeights<T>& weights,
                       MhsaCache<T>* cache = nullptr);

template <typename T>
struct MhsaGrads {
  Volume<T> input;
  MhsaWeights<T> weights;
};

template <typename T>
MhsaGrads<T> mhsa_backward(const MhsaCache<T>& cache, const MhsaConfig& config,
                           const MhsaWeights<T>& weights, const Volume<T>& grad_out);

}  // namespace amber
