#pragma once

#include <cstdint>
#include <vector>

#include "amber/tensor.hpp"

namespace amber {

/// Integer label grid (D, H, W), row-major.
struct LabelMask {
  Extent3 dims;
  std::vector<std::uint8_t> labels;

  LabelMask() = default;
  explicit LabelMask(const Extent3& e, std::uint8_t fill = 0) : dims(e), labels(e.voxels(), fill) {}
  LabelMask(const Extent3& e, std::vector<std::uint8_t> values);

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t index(std::size_t d, std::size_t h, std::size_t w) const noexcept {
    return (d * dims.h + h) * dims.w + w;
  }
  std::uint8_t at(std::size_t d, std::size_t h, std::size_t w) const noexcept {
    return labels[index(d, h, w)];
  }
  std::uint8_t& at(std::size_t d, std::size_t h, std::size_t w) noexcept {
    return labels[index(d, h, w)];
  }
  bool operator==(const LabelMask&) const = default;
};

/// 1 where label == cls, else 0.
LabelMask binarize(const LabelMask& mask, std::uint8_t cls);

/// Throws InputError if any label >= num_classes.
void check_labels(const LabelMask& mask, std::size_t num_classes);

/// Nearest-neighbour resampling: output voxel i reads input floor((i + 0.5) * in / out).
LabelMask downsample_nearest(const LabelMask& mask, const Extent3& target);

/// (B, D, H, W, J) one-hot encoding of a batch of equally shaped masks.
template <typename T>
Volume<T> one_hot(const std::vector<LabelMask>& masks, std::size_t num_classes);

/// Per-voxel argmax over channels of sample `b`.
template <typename T>
LabelMask argmax_labels(const Volume<T>& scores, std::size_t b);

}  // namespace amber
