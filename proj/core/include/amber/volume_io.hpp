#pragma once

#include <filesystem>
#include <string>

#include "amber/labels.hpp"
#include "amber/metrics.hpp"
#include "amber/tensor.hpp"

namespace amber {

/// Sidecar header of a volume file pair `<base>.json` + `<base>.raw`.
struct VolumeHeader {
  Extent3 shape;
  std::size_t channels = 1;
  std::string dtype;  // "float32" or "uint8"
  std::string byte_order = "little";
  Spacing spacing{1.0, 1.0, 1.0};
  std::size_t num_classes = 0;

  std::size_t element_size() const;
  std::size_t payload_bytes() const { return shape.voxels() * channels * element_size(); }
};

std::filesystem::path header_path(const std::filesystem::path& base);
std::filesystem::path payload_path(const std::filesystem::path& base);

/// Writes a single-sample (B = 1) intensity volume as little-endian float32.
void write_volume(const std::filesystem::path& base, const Volume<float>& x,
                  const Spacing& spacing = {1.0, 1.0, 1.0});
Volume<float> read_volume(const std::filesystem::path& base, VolumeHeader* header = nullptr);

void write_mask(const std::filesystem::path& base, const LabelMask& mask, std::size_t num_classes,
                const Spacing& spacing = {1.0, 1.0, 1.0});
LabelMask read_mask(const std::filesystem::path& base, VolumeHeader* header = nullptr);

VolumeHeader read_header(const std::filesystem::path& base);

/// Whole-file helpers shared by the dataset and checkpoint code.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);
/// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

}  // namespace amber
