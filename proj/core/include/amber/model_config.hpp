#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "amber/layers.hpp"
#include "amber/tensor.hpp"

namespace amber {

inline constexpr std::size_t kNumStages = 4;
using StageArray = std::array<std::size_t, kNumStages>;

/// Full architecture description shared by the encoder, decoder and accounting code.
struct ModelConfig {
  std::size_t in_channels = 1;
  StageArray dims{23, 64, 128, 256};
  StageArray depths{2, 2, 2, 2};
  StageArray strides{2, 2, 2, 2};
  std::size_t merge_kernel = 3;
  std::size_t merge_padding = 1;
  MixingKind mixing = MixingKind::afno;
  StageArray afno_blocks{1, 8, 8, 8};
  double shrink_threshold = 0.01;
  std::size_t hidden_multiplier = 1;
  std::size_t kept_modes = 0;
  StageArray mhsa_heads{1, 2, 4, 8};
  std::size_t max_tokens = 32768;
  std::size_t ffn_expansion = 4;
  std::size_t decoder_dim = 128;
  std::size_t num_classes = 2;
  double norm_eps = 1e-5;

  /// Input-independent checks; throws ConfigError naming the field.
  void validate() const;
  /// Checks that an input of this spatial extent is legal end to end.
  void validate_input(const Extent3& input) const;

  ConvSpec merge_spec(std::size_t stage) const;
  AfnoConfig afno_config(std::size_t stage) const;
  MhsaConfig mhsa_config(std::size_t stage) const;
  /// Spatial extents of the four encoder features for a given input extent.
  std::array<Extent3, kNumStages> stage_extents(const Extent3& input) const;
};

std::string stage_array_string(const StageArray& a);

}  // namespace amber
