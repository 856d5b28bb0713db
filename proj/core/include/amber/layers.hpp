#pragma once

#include <string>
#include <vector>

#include "amber/afno.hpp"
#include "amber/mhsa.hpp"
#include "amber/ops.hpp"
#include "amber/parameters.hpp"

namespace amber {

/// Adds `delta` into the gradient accumulator of `p`.
template <typename T>
void accumulate_grad(Parameter<T>& p, std::span<const T> delta);

/// conv3d (or its transpose) bound to a weight and bias in a ParameterStore.
template <typename T>
class ConvLayer {
 public:
  ConvLayer() = default;
  ConvLayer(ParameterStore<T>& store, const std::string& prefix, const ConvSpec& spec,
            bool transposed = false);

  const ConvSpec& spec() const noexcept { return spec_; }
  Volume<T> forward(const Volume<T>& x) const;
  /// Accumulates parameter gradients and returns dL/dx.
  Volume<T> backward(const Volume<T>& x, const Volume<T>& grad_out);

 private:
  ConvSpec spec_;
  bool transposed_ = false;
  Parameter<T>* weight_ = nullptr;
  Parameter<T>* bias_ = nullptr;
};

template <typename T>
class LayerNormLayer {
 public:
  LayerNormLayer() = default;
  LayerNormLayer(ParameterStore<T>& store, const std::string& prefix, std::size_t channels, T eps);

  Volume<T> forward(const Volume<T>& x, NormCache<T>* cache) const;
  Volume<T> backward(const NormCache<T>& cache, const Volume<T>& grad_out);

 private:
  T eps_ = T(1e-5);
  Parameter<T>* gamma_ = nullptr;
  Parameter<T>* beta_ = nullptr;
};

template <typename T>
class BatchNormLayer {
 public:
  BatchNormLayer() = default;
  BatchNormLayer(ParameterStore<T>& store, const std::string& prefix, std::size_t channels,
                 T eps);

  /// Training mode updates the running statistics buffers.
  Volume<T> forward(const Volume<T>& x, bool training, NormCache<T>* cache);
  Volume<T> backward(const NormCache<T>& cache, const Volume<T>& grad_out, bool training);

 private:
  T eps_ = T(1e-5);
  Parameter<T>* gamma_ = nullptr;
  Parameter<T>* beta_ = nullptr;
  Parameter<T>* running_mean_ = nullptr;
  Parameter<T>* running_var_ = nullptr;
};

template <typename T>
struct MixFfnCache {
  Volume<T> input;
  Volume<T> lifted;     // fc1 output
  Volume<T> mixed;      // depthwise conv output, pre-GELU
  Volume<T> activated;  // GELU output
};

/// fc2(GELU(dwconv3(fc1(x)))); the residual is added by the caller or by forward().
template <typename T>
class MixFfn {
 public:
  MixFfn() = default;
  MixFfn(ParameterStore<T>& store, const std::string& prefix, std::size_t channels,
         std::size_t expansion);

  Volume<T> branch(const Volume<T>& x, MixFfnCache<T>* cache) const;
  Volume<T> forward(const Volume<T>& x) const;
  Volume<T> branch_backward(const MixFfnCache<T>& cache, const Volume<T>& grad_out);

  const ConvLayer<T>& fc1() const { return fc1_; }
  const ConvLayer<T>& depthwise() const { return dw_; }
  const ConvLayer<T>& fc2() const { return fc2_; }

 private:
  ConvLayer<T> fc1_, dw_, fc2_;
};

enum class MixingKind { afno, mhsa };

const char* mixing_name(MixingKind kind);
MixingKind parse_mixing(const std::string& text);

template <typename T>
struct MixingCache {
  AfnoCache<T> afno;
  MhsaCache<T> mhsa;
};

/// Token-mixing sublayer: AFNO-3D or the MHSA baseline. Residual excluded.
template <typename T>
class MixingLayer {
 public:
  MixingLayer() = default;
  MixingLayer(ParameterStore<T>& store, const std::string& prefix, MixingKind kind,
              const AfnoConfig& afno, const MhsaConfig& mhsa);

  MixingKind kind() const noexcept { return kind_; }
  Volume<T> branch(const Volume<T>& x, MixingCache<T>* cache) const;
  Volume<T> branch_backward(const MixingCache<T>& cache, const Volume<T>& grad_out);

  AfnoWeights<T> afno_weights() const;
  MhsaWeights<T> mhsa_weights() const;

 private:
  MixingKind kind_ = MixingKind::afno;
  AfnoConfig afno_;
  MhsaConfig mhsa_;
  std::vector<Parameter<T>*> params_;  // afno: w1 b1 w2 b2; mhsa: wq bq wk bk wv bv wo bo
};

}  // namespace amber
