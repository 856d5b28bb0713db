#include "amber/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace amber {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "volume files are little-endian; big-endian hosts need byte swapping");

std::size_t VolumeHeader::element_size() const {
  if (dtype == "float32") return 4;
  if (dtype == "uint8") return 1;
  throw FormatError("unknown element type '" + dtype + "'");
}

fs::path header_path(const fs::path& base) { return fs::path(base.string() + ".json"); }
fs::path payload_path(const fs::path& base) { return fs::path(base.string() + ".raw"); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

namespace {

void write_header(const fs::path& base, const VolumeHeader& h) {
  json j = {{"format", "amber-volume"},
            {"version", 1},
            {"shape", {h.shape.d, h.shape.h, h.shape.w}},
            {"channels", h.channels},
            {"dtype", h.dtype},
            {"byte_order", h.byte_order},
            {"spacing", h.spacing},
            {"num_classes", h.num_classes}};
  write_file(header_path(base), j.dump(2) + "\n");
}

std::string read_payload(const fs::path& base, const VolumeHeader& h) {
  std::string bytes = read_file(payload_path(base));
  if (bytes.size() != h.payload_bytes()) {
    throw FormatError("'" + payload_path(base).string() + "': header declares " +
                      h.shape.str() + " x " + std::to_string(h.channels) + " " + h.dtype +
                      " = " + std::to_string(h.payload_bytes()) + " bytes, payload has " +
                      std::to_string(bytes.size()));
  }
  return bytes;
}

}  // namespace

VolumeHeader read_header(const fs::path& base) {
  const fs::path hp = header_path(base);
  json j;
  try {
    j = json::parse(read_file(hp));
  } catch (const json::exception& e) {
    throw FormatError("'" + hp.string() + "': " + e.what());
  }
  VolumeHeader h;
  try {
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3) throw FormatError("'" + hp.string() + "': shape needs 3 extents");
    h.shape = {shape[0], shape[1], shape[2]};
    h.channels = j.value("channels", std::size_t{1});
    h.dtype = j.at("dtype").get<std::string>();
    h.byte_order = j.at("byte_order").get<std::string>();
    h.spacing = j.value("spacing", Spacing{1.0, 1.0, 1.0});
    h.num_classes = j.value("num_classes", std::size_t{0});
  } catch (const json::exception& e) {
    throw FormatError("'" + hp.string() + "': " + e.what());
  }
  if (h.shape.voxels() == 0 || h.channels == 0) {
    throw FormatError("'" + hp.string() + "': empty shape " + h.shape.str());
  }
  if (h.byte_order != "little") {
    throw FormatError("'" + hp.string() + "': unsupported byte order '" + h.byte_order + "'");
  }
  h.element_size();
  return h;
}

void write_volume(const fs::path& base, const Volume<float>& x, const Spacing& spacing) {
  const Shape5& s = x.shape();
  if (s.b != 1) throw ConfigError("write_volume: expected batch 1, got " + std::to_string(s.b));
  if (s.size() == 0) throw FormatError("write_volume: empty shape " + s.str());
  VolumeHeader h{spatial(s), s.c, "float32", "little", spacing, 0};
  std::string bytes(x.size() * sizeof(float), '\0');
  std::memcpy(bytes.data(), x.data().data(), bytes.size());
  write_header(base, h);
  write_file(payload_path(base), bytes);
}

Volume<float> read_volume(const fs::path& base, VolumeHeader* header) {
  VolumeHeader h = read_header(base);
  if (h.dtype != "float32") throw FormatError("'" + base.string() + "': expected float32 volume");
  const std::string bytes = read_payload(base, h);
  std::vector<float> data(h.shape.voxels() * h.channels);
  std::memcpy(data.data(), bytes.data(), bytes.size());
  if (header) *header = h;
  return Volume<float>(Shape5{1, h.shape.d, h.shape.h, h.shape.w, h.channels}, std::move(data));
}

void write_mask(const fs::path& base, const LabelMask& mask, std::size_t num_classes,
                const Spacing& spacing) {
  if (mask.size() == 0) throw FormatError("write_mask: empty shape " + mask.dims.str());
  check_labels(mask, num_classes);
  VolumeHeader h{mask.dims, 1, "uint8", "little", spacing, num_classes};
  write_header(base, h);
  write_file(payload_path(base), std::string(mask.labels.begin(), mask.labels.end()));
}

LabelMask read_mask(const fs::path& base, VolumeHeader* header) {
  VolumeHeader h = read_header(base);
  if (h.dtype != "uint8" || h.channels != 1) {
    throw FormatError("'" + base.string() + "': expected single-channel uint8 mask");
  }
  const std::string bytes = read_payload(base, h);
  LabelMask m(h.shape, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
  if (h.num_classes) {
    try {
      check_labels(m, h.num_classes);
    } catch (const InputError& e) {
      throw FormatError("'" + base.string() + "': " + e.what());
    }
  }
  if (header) *header = h;
  return m;
}

}  // namespace amber
