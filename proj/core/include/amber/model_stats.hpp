#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amber/model.hpp"

namespace amber {

struct CostEntry {
  std::string name;  // layer prefix, matching parameter names
  std::string kind;  // conv, conv_transposed, layer_norm, batch_norm, afno, mhsa
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
};

struct CostBreakdown {
  std::vector<CostEntry> entries;
  std::uint64_t total_params = 0;
  std::uint64_t total_flops = 0;

  void add(CostEntry entry);
  const CostEntry* find(const std::string& name) const;
};

/// Enumerates stored trainable scalars grouped by layer (buffers excluded).
template <typename T>
CostBreakdown count_params(const ParameterStore<T>& store);

/// Analytic per-layer parameter and FLOP counts for one forward pass at the given input.
/// Multiply-accumulate = 2 flops; norms, activations, upsampling and residual adds are free.
CostBreakdown count_flops(const ModelConfig& config, const Extent3& input, std::size_t batch = 1);

/// Closed-form total trainable parameters of a model.
std::uint64_t closed_form_params(const ModelConfig& config);

std::uint64_t conv_params(const ConvSpec& spec);
std::uint64_t conv_flops(const ConvSpec& spec, const Extent3& output, std::size_t batch);
std::uint64_t mhsa_params(std::size_t channels);

/// One rfft3 or irfft3: C B (2.5 V log2 V + 2 V), half a complex 3D FFT plus the fold.
double rfft3_flops(const Extent3& dims, std::size_t channels, std::size_t batch);
/// Block MLP over the half-spectrum: 8 flops per complex multiply-accumulate.
std::uint64_t afno_mlp_flops(const AfnoConfig& config, const Extent3& dims, std::size_t batch);
/// rfft3 + block MLP + irfft3.
std::uint64_t afno_flops(const AfnoConfig& config, const Extent3& dims, std::size_t batch);
/// Score and value products only: 4 L^2 C.
std::uint64_t mhsa_attention_flops(std::size_t tokens, std::size_t channels, std::size_t batch);
/// Attention core plus the four C x C projections (8 L C^2).
std::uint64_t mhsa_flops(std::size_t tokens, std::size_t channels, std::size_t batch);

struct CrossoverPoint {
  Extent3 dims;
  std::uint64_t tokens = 0;
  std::uint64_t afno = 0;
  std::uint64_t mhsa = 0;
};

struct CrossoverReport {
  std::vector<CrossoverPoint> sweep;
  /// First swept token count at which MHSA costs more than AFNO; 0 if none.
  std::uint64_t crossover_tokens = 0;
};

/// Sweeps cubic grids 2^k per side (k = 1..max_log2_side) for one mixing layer.
CrossoverReport mixing_crossover(const AfnoConfig& afno, std::size_t max_log2_side);

}  // namespace amber
