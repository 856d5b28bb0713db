#include "amber/model_config.hpp"

#include <sstream>

namespace amber {

namespace {

std::string field(const char* name, std::size_t stage) {
  return std::string("model.") + name + "[" + std::to_string(stage) + "]";
}

}  // namespace

std::string stage_array_string(const StageArray& a) {
  std::ostringstream os;
  for (std::size_t i = 0; i < a.size(); ++i) os << (i ? "," : "") << a[i];
  return os.str();
}

void ModelConfig::validate() const {
  if (in_channels < 1) throw ConfigError("model.in_channels must be >= 1");
  if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
  if (decoder_dim < 1) throw ConfigError("model.decoder_dim must be >= 1");
  if (ffn_expansion < 1) throw ConfigError("model.ffn_expansion must be >= 1");
  if (hidden_multiplier < 1) throw ConfigError("model.hidden_multiplier must be >= 1");
  if (!(shrink_threshold >= 0.0)) throw ConfigError("model.shrink_threshold must be >= 0");
  if (!(norm_eps > 0.0)) throw ConfigError("model.norm_eps must be > 0");
  if (merge_kernel < 1) throw ConfigError("model.merge_kernel must be >= 1");
  if (max_tokens < 1) throw ConfigError("model.max_tokens must be >= 1");
  for (std::size_t i = 0; i < kNumStages; ++i) {
    if (dims[i] < 1) throw ConfigError(field("dims", i) + " must be >= 1");
    if (i > 0 && dims[i] <= dims[i - 1]) {
      throw ConfigError(field("dims", i) + " must exceed the previous stage width");
    }
    if (strides[i] < 1) throw ConfigError(field("strides", i) + " must be >= 1");
    if (afno_blocks[i] < 1 || dims[i] % afno_blocks[i] != 0) {
      throw ConfigError(field("afno_blocks", i) + " = " + std::to_string(afno_blocks[i]) +
                        " must divide dims = " + std::to_string(dims[i]));
    }
    if (mhsa_heads[i] < 1 || dims[i] % mhsa_heads[i] != 0) {
      throw ConfigError(field("mhsa_heads", i) + " = " + std::to_string(mhsa_heads[i]) +
                        " must divide dims = " + std::to_string(dims[i]));
    }
  }
}

ConvSpec ModelConfig::merge_spec(std::size_t stage) const {
  const std::size_t cin = stage == 0 ? in_channels : dims[stage - 1];
  return ConvSpec::cube(merge_kernel, strides[stage], merge_padding, cin, dims[stage]);
}

AfnoConfig ModelConfig::afno_config(std::size_t stage) const {
  return {dims[stage], afno_blocks[stage], shrink_threshold, hidden_multiplier, kept_modes};
}

MhsaConfig ModelConfig::mhsa_config(std::size_t stage) const {
  return {dims[stage], mhsa_heads[stage], max_tokens};
}

std::array<Extent3, kNumStages> ModelConfig::stage_extents(const Extent3& input) const {
  std::array<Extent3, kNumStages> out;
  Extent3 e = input;
  for (std::size_t i = 0; i < kNumStages; ++i) {
    e = merge_spec(i).output_extent(e);
    out[i] = e;
  }
  return out;
}

void ModelConfig::validate_input(const Extent3& input) const {
  validate();
  if (input.d < 1 || input.h < 1 || input.w < 1) {
    throw ConfigError("input extent " + input.str() + " has a zero axis");
  }
  const auto ext = stage_extents(input);
  for (std::size_t i = 0; i < kNumStages; ++i) {
    if (depths[i] == 0) continue;
    if (mixing == MixingKind::afno && ext[i].w != 1 && ext[i].w % 2 != 0) {
      throw ConfigError("stage " + std::to_string(i) + " width " + std::to_string(ext[i].w) +
                        " is odd; AFNO needs an even width (pad width to even)");
    }
    if (mixing == MixingKind::mhsa && ext[i].voxels() > max_tokens) {
      throw ConfigError("stage " + std::to_string(i) + " has " +
                        std::to_string(ext[i].voxels()) + " tokens, above model.max_tokens");
    }
  }
  // The decoder's transposed conv multiplies the finest extent by strides[0].
  const std::size_t s = strides[0];
  const Extent3 native{ext[0].d * s, ext[0].h * s, ext[0].w * s};
  if (!(native == input)) {
    throw ConfigError("input extent " + input.str() + " is not a multiple of strides[0] = " +
                      std::to_string(s) + "; decoder would return " + native.str());
  }
}

}  // namespace amber
