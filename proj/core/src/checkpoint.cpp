#include "amber/checkpoint.hpp"

#include <cstring>
#include <sstream>

#include "amber/volume_io.hpp"

namespace amber {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
const char* dtype_name() {
  return sizeof(T) == 4 ? "float32" : "float64";
}

StageArray stage_array(const json& j, const char* key) {
  const auto v = j.at(key).get<std::vector<std::size_t>>();
  if (v.size() != kNumStages) {
    throw ConfigError(std::string("model.") + key + " needs 4 entries, got " +
                      std::to_string(v.size()));
  }
  return {v[0], v[1], v[2], v[3]};
}

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  return {{"in_channels", c.in_channels},
          {"dims", c.dims},
          {"depths", c.depths},
          {"strides", c.strides},
          {"merge_kernel", c.merge_kernel},
          {"merge_padding", c.merge_padding},
          {"mixing", mixing_name(c.mixing)},
          {"afno_blocks", c.afno_blocks},
          {"shrink_threshold", c.shrink_threshold},
          {"hidden_multiplier", c.hidden_multiplier},
          {"kept_modes", c.kept_modes},
          {"mhsa_heads", c.mhsa_heads},
          {"max_tokens", c.max_tokens},
          {"ffn_expansion", c.ffn_expansion},
          {"decoder_dim", c.decoder_dim},
          {"num_classes", c.num_classes},
          {"norm_eps", c.norm_eps}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.dims = stage_array(j, "dims");
    c.depths = stage_array(j, "depths");
    c.strides = stage_array(j, "strides");
    c.merge_kernel = j.at("merge_kernel").get<std::size_t>();
    c.merge_padding = j.at("merge_padding").get<std::size_t>();
    c.mixing = parse_mixing(j.at("mixing").get<std::string>());
    c.afno_blocks = stage_array(j, "afno_blocks");
    c.shrink_threshold = j.at("shrink_threshold").get<double>();
    c.hidden_multiplier = j.at("hidden_multiplier").get<std::size_t>();
    c.kept_modes = j.at("kept_modes").get<std::size_t>();
    c.mhsa_heads = stage_array(j, "mhsa_heads");
    c.max_tokens = j.at("max_tokens").get<std::size_t>();
    c.ffn_expansion = j.at("ffn_expansion").get<std::size_t>();
    c.decoder_dim = j.at("decoder_dim").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.norm_eps = j.at("norm_eps").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename T>
CheckpointManifest save_checkpoint(const fs::path& dir, const SegmentationModel<T>& model,
                                   long step) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create checkpoint directory '" + dir.string() + "'");
  }
  CheckpointManifest m{model.config(), step, {}};
  std::string payload;
  json tensors = json::array();
  for (const auto& p : model.parameters().all()) {
    TensorRecord r{p.name, p.shape, p.complex, p.trainable, dtype_name<T>(), payload.size(),
                   p.value.size() * sizeof(T), ""};
    const auto* bytes = reinterpret_cast<const char*>(p.value.data().data());
    const std::string_view view(bytes, r.bytes);
    r.fnv1a64 = hex64(fnv1a64(view));
    payload.append(view);
    tensors.push_back({{"name", r.name},
                       {"shape", r.shape},
                       {"complex", r.complex},
                       {"trainable", r.trainable},
                       {"dtype", r.dtype},
                       {"offset", r.offset},
                       {"bytes", r.bytes},
                       {"fnv1a64", r.fnv1a64}});
    m.tensors.push_back(std::move(r));
  }
  json j = {{"format", "amber-checkpoint"},
            {"version", 1},
            {"byte_order", "little"},
            {"step", step},
            {"model", model_config_to_json(model.config())},
            {"payload", "params.bin"},
            {"payload_bytes", payload.size()},
            {"tensors", tensors}};
  write_file(dir / "params.bin", payload);
  write_file(dir / "manifest.json", j.dump(2) + "\n");
  return m;
}

CheckpointManifest read_checkpoint_manifest(const fs::path& dir) {
  const fs::path mp = dir / "manifest.json";
  if (!fs::exists(mp)) throw IoError("checkpoint manifest '" + mp.string() + "' not found");
  CheckpointManifest m;
  try {
    const json j = json::parse(read_file(mp));
    if (j.value("format", "") != "amber-checkpoint") {
      throw FormatError("'" + mp.string() + "' is not a checkpoint manifest");
    }
    m.config = model_config_from_json(j.at("model"));
    m.step = j.value("step", 0L);
    for (const auto& t : j.at("tensors")) {
      m.tensors.push_back({t.at("name"), t.at("shape").get<std::vector<std::size_t>>(),
                           t.at("complex"), t.at("trainable"), t.at("dtype"), t.at("offset"),
                           t.at("bytes"), t.at("fnv1a64")});
    }
  } catch (const json::exception& e) {
    throw FormatError("'" + mp.string() + "': " + e.what());
  }
  return m;
}

template <typename T>
void load_checkpoint(const fs::path& dir, SegmentationModel<T>& model) {
  const CheckpointManifest m = read_checkpoint_manifest(dir);
  auto& params = model.parameters();
  std::ostringstream diff;
  for (const auto& p : params.all()) {
    const TensorRecord* r = nullptr;
    for (const auto& t : m.tensors)
      if (t.name == p.name) r = &t;
    if (!r) {
      diff << "\n  missing in checkpoint: " << p.name << " " << shape_string(p.shape);
    } else if (r->shape != p.shape || r->complex != p.complex) {
      diff << "\n  " << p.name << ": checkpoint " << shape_string(r->shape) << ", model "
           << shape_string(p.shape);
    }
  }
  for (const auto& t : m.tensors)
    if (!params.find(t.name)) diff << "\n  unexpected in checkpoint: " << t.name;
  if (!diff.str().empty()) throw ConfigError("checkpoint/model mismatch:" + diff.str());

  const std::string payload = read_file(dir / "params.bin");
  for (const auto& r : m.tensors) {
    if (r.offset + r.bytes > payload.size()) {
      throw FormatError("params.bin truncated at tensor '" + r.name + "'");
    }
    const std::string_view view(payload.data() + r.offset, r.bytes);
    if (hex64(fnv1a64(view)) != r.fnv1a64) {
      throw FormatError("tensor '" + r.name + "' fails its payload hash");
    }
    auto dst = params.get(r.name).value.data();
    const std::size_t elem = r.dtype == "float32" ? 4 : r.dtype == "float64" ? 8 : 0;
    if (elem == 0) throw FormatError("tensor '" + r.name + "': unknown dtype " + r.dtype);
    if (r.bytes != dst.size() * elem) {
      throw FormatError("tensor '" + r.name + "': " + std::to_string(r.bytes) +
                        " bytes for " + std::to_string(dst.size()) + " scalars");
    }
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (elem == 4) {
        float v;
        std::memcpy(&v, view.data() + 4 * i, 4);
        dst[i] = static_cast<T>(v);
      } else {
        double v;
        std::memcpy(&v, view.data() + 8 * i, 8);
        dst[i] = static_cast<T>(v);
      }
    }
  }
}

template <typename T>
std::unique_ptr<SegmentationModel<T>> load_model(const fs::path& dir,
                                                 CheckpointManifest* manifest) {
  CheckpointManifest m = read_checkpoint_manifest(dir);
  auto model = std::make_unique<SegmentationModel<T>>(m.config, 0);
  load_checkpoint(dir, *model);
  if (manifest) *manifest = std::move(m);
  return model;
}

#define AMBER_INSTANTIATE(T)                                                                   \
  template CheckpointManifest save_checkpoint<T>(const fs::path&, const SegmentationModel<T>&, \
                                                 long);                                        \
  template void load_checkpoint<T>(const fs::path&, SegmentationModel<T>&);                    \
  template std::unique_ptr<SegmentationModel<T>> load_model<T>(const fs::path&,                \
                                                               CheckpointManifest*);

AMBER_INSTANTIATE(float)
AMBER_INSTANTIATE(double)

}  // namespace amber
