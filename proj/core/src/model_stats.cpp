#include "amber/model_stats.hpp"

#include <cmath>
#include <map>

namespace amber {

void CostBreakdown::add(CostEntry entry) {
  total_params += entry.params;
  total_flops += entry.flops;
  entries.push_back(std::move(entry));
}

const CostEntry* CostBreakdown::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

namespace {

std::string layer_of(const std::string& name) { return name.substr(0, name.rfind('.')); }

std::string kind_of(const std::string& layer) {
  if (layer.find("norm") != std::string::npos) return "layer_norm";
  if (layer.find("_bn") != std::string::npos) return "batch_norm";
  if (layer == "decoder.up") return "conv_transposed";
  return "conv";
}

std::uint64_t layer_norm_params(std::size_t c) { return 2 * c; }

}  // namespace

template <typename T>
CostBreakdown count_params(const ParameterStore<T>& store) {
  CostBreakdown out;
  std::vector<std::string> order;
  std::map<std::string, std::uint64_t> counts;
  std::map<std::string, std::string> kinds;
  for (const auto& p : store.all()) {
    if (!p.trainable) continue;
    const std::string layer = layer_of(p.name);
    if (!counts.count(layer)) {
      order.push_back(layer);
      kinds[layer] = layer.ends_with(".mixing") ? (p.complex ? "afno" : "mhsa") : kind_of(layer);
    }
    counts[layer] += p.scalar_count();
  }
  for (const auto& layer : order) out.add({layer, kinds[layer], counts[layer], 0});
  return out;
}

std::uint64_t conv_params(const ConvSpec& spec) {
  return spec.kernel_volume() * (spec.in_channels / spec.groups) * spec.out_channels +
         spec.out_channels;
}

std::uint64_t conv_flops(const ConvSpec& spec, const Extent3& output, std::size_t batch) {
  return 2ULL * spec.kernel_volume() * (spec.in_channels / spec.groups) * spec.out_channels *
         output.voxels() * batch;
}

std::uint64_t mhsa_params(std::size_t channels) { return 4ULL * channels * channels + 4 * channels; }

double rfft3_flops(const Extent3& dims, std::size_t channels, std::size_t batch) {
  const double v = static_cast<double>(dims.voxels());
  const double log_v = v > 1.0 ? std::log2(v) : 0.0;
  return static_cast<double>(channels * batch) * (2.5 * v * log_v + 2.0 * v);
}

std::uint64_t afno_mlp_flops(const AfnoConfig& config, const Extent3& dims, std::size_t batch) {
  const std::uint64_t positions = batch * dims.d * dims.h * (dims.w / 2 + 1);
  const std::uint64_t per_block = 8ULL * config.block_width() * config.hidden_width() * 2;
  return positions * config.num_blocks * per_block;
}

std::uint64_t afno_flops(const AfnoConfig& config, const Extent3& dims, std::size_t batch) {
  const double fft = 2.0 * rfft3_flops(dims, config.channels, batch);
  return static_cast<std::uint64_t>(std::llround(fft)) + afno_mlp_flops(config, dims, batch);
}

std::uint64_t mhsa_attention_flops(std::size_t tokens, std::size_t channels, std::size_t batch) {
  return 4ULL * tokens * tokens * channels * batch;
}

std::uint64_t mhsa_flops(std::size_t tokens, std::size_t channels, std::size_t batch) {
  return mhsa_attention_flops(tokens, channels, batch) + 8ULL * tokens * channels * channels * batch;
}

CostBreakdown count_flops(const ModelConfig& config, const Extent3& input, std::size_t batch) {
  config.validate_input(input);
  CostBreakdown out;
  const auto ext = config.stage_extents(input);
  for (std::size_t i = 0; i < kNumStages; ++i) {
    const std::string p = "encoder.stage" + std::to_string(i);
    const std::size_t c = config.dims[i];
    const ConvSpec merge = config.merge_spec(i);
    out.add({p + ".merge", "conv", conv_params(merge), conv_flops(merge, ext[i], batch)});
    out.add({p + ".merge_norm", "layer_norm", layer_norm_params(c), 0});
    const std::size_t hidden = c * config.ffn_expansion;
    const ConvSpec fc1 = ConvSpec::cube(1, 1, 0, c, hidden);
    const ConvSpec dw = ConvSpec::cube(3, 1, 1, hidden, hidden, hidden);
    const ConvSpec fc2 = ConvSpec::cube(1, 1, 0, hidden, c);
    for (std::size_t j = 0; j < config.depths[i]; ++j) {
      const std::string b = p + ".block" + std::to_string(j);
      out.add({b + ".norm1", "layer_norm", layer_norm_params(c), 0});
      if (config.mixing == MixingKind::afno) {
        const AfnoConfig a = config.afno_config(i);
        out.add({b + ".mixing", "afno", afno_parameter_count(a), afno_flops(a, ext[i], batch)});
      } else {
        out.add({b + ".mixing", "mhsa", mhsa_params(c), mhsa_flops(ext[i].voxels(), c, batch)});
      }
      out.add({b + ".norm2", "layer_norm", layer_norm_params(c), 0});
      out.add({b + ".ffn.fc1", "conv", conv_params(fc1), conv_flops(fc1, ext[i], batch)});
      out.add({b + ".ffn.dwconv", "conv", conv_params(dw), conv_flops(dw, ext[i], batch)});
      out.add({b + ".ffn.fc2", "conv", conv_params(fc2), conv_flops(fc2, ext[i], batch)});
    }
  }
  const std::size_t d = config.decoder_dim, n = config.num_classes;
  const Extent3 finest = ext[0];
  for (std::size_t i = 0; i < kNumStages; ++i) {
    const ConvSpec proj = ConvSpec::cube(1, 1, 0, config.dims[i], d);
    out.add({"decoder.proj" + std::to_string(i), "conv", conv_params(proj),
             conv_flops(proj, ext[i], batch)});
  }
  const ConvSpec fuse = ConvSpec::cube(1, 1, 0, kNumStages * d, d);
  out.add({"decoder.fuse", "conv", conv_params(fuse), conv_flops(fuse, finest, batch)});
  out.add({"decoder.fuse_bn", "batch_norm", 2ULL * d, 0});
  const std::size_t s = config.strides[0];
  const ConvSpec up = ConvSpec::cube(s, s, 0, d, n);
  // Each input voxel feeds s^3 outputs with d x n weights.
  out.add({"decoder.up", "conv_transposed", conv_params(up), conv_flops(up, finest, batch)});
  const ConvSpec head = ConvSpec::cube(1, 1, 0, n, n);
  out.add({"decoder.head", "conv", conv_params(head), conv_flops(head, input, batch)});
  for (std::size_t i = 0; i < kNumStages; ++i) {
    const ConvSpec aux = ConvSpec::cube(1, 1, 0, d, n);
    out.add({"decoder.aux" + std::to_string(i), "conv", conv_params(aux),
             conv_flops(aux, ext[i], batch)});
  }
  return out;
}

std::uint64_t closed_form_params(const ModelConfig& config) {
  config.validate();
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < kNumStages; ++i) {
    const std::size_t c = config.dims[i], hidden = c * config.ffn_expansion;
    total += conv_params(config.merge_spec(i)) + layer_norm_params(c);
    const std::uint64_t mixing = config.mixing == MixingKind::afno
                                     ? afno_parameter_count(config.afno_config(i))
                                     : mhsa_params(c);
    const std::uint64_t ffn = conv_params(ConvSpec::cube(1, 1, 0, c, hidden)) +
                              conv_params(ConvSpec::cube(3, 1, 1, hidden, hidden, hidden)) +
                              conv_params(ConvSpec::cube(1, 1, 0, hidden, c));
    total += config.depths[i] * (2 * layer_norm_params(c) + mixing + ffn);
  }
  const std::size_t d = config.decoder_dim, n = config.num_classes, s = config.strides[0];
  for (std::size_t i = 0; i < kNumStages; ++i) {
    total += conv_params(ConvSpec::cube(1, 1, 0, config.dims[i], d));
    total += conv_params(ConvSpec::cube(1, 1, 0, d, n));
  }
  total += conv_params(ConvSpec::cube(1, 1, 0, kNumStages * d, d)) + 2ULL * d;
  total += conv_params(ConvSpec::cube(s, s, 0, d, n)) + conv_params(ConvSpec::cube(1, 1, 0, n, n));
  return total;
}

CrossoverReport mixing_crossover(const AfnoConfig& afno, std::size_t max_log2_side) {
  afno.validate();
  CrossoverReport r;
  for (std::size_t k = 1; k <= max_log2_side; ++k) {
    const std::size_t side = std::size_t{1} << k;
    const Extent3 dims{side, side, side};
    CrossoverPoint p{dims, dims.voxels(), afno_flops(afno, dims, 1),
                     mhsa_flops(dims.voxels(), afno.channels, 1)};
    if (r.crossover_tokens == 0 && p.mhsa > p.afno) r.crossover_tokens = p.tokens;
    r.sweep.push_back(p);
  }
  return r;
}

template CostBreakdown count_params<float>(const ParameterStore<float>&);
template CostBreakdown count_params<double>(const ParameterStore<double>&);

}  // namespace amber
