#include "amber/labels.hpp"

#include <algorithm>
#include <string>

namespace amber {

LabelMask::LabelMask(const Extent3& e, std::vector<std::uint8_t> values)
    : dims(e), labels(std::move(values)) {
  if (labels.size() != dims.voxels()) {
    throw ConfigError("label mask length " + std::to_string(labels.size()) +
                      " does not match extent " + dims.str());
  }
}

LabelMask binarize(const LabelMask& mask, std::uint8_t cls) {
  LabelMask out(mask.dims);
  for (std::size_t i = 0; i < mask.size(); ++i) out.labels[i] = mask.labels[i] == cls ? 1 : 0;
  return out;
}

void check_labels(const LabelMask& mask, std::size_t num_classes) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.labels[i] >= num_classes) {
      throw InputError("label " + std::to_string(mask.labels[i]) + " at voxel " +
                       std::to_string(i) + " is outside [0, " + std::to_string(num_classes) +
                       ")");
    }
  }
}

LabelMask downsample_nearest(const LabelMask& mask, const Extent3& target) {
  auto src = [](std::size_t i, std::size_t in, std::size_t out) {
    return std::min(in - 1, (2 * i + 1) * in / (2 * out));
  };
  LabelMask out(target);
  for (std::size_t d = 0; d < target.d; ++d)
    for (std::size_t h = 0; h < target.h; ++h)
      for (std::size_t w = 0; w < target.w; ++w)
        out.at(d, h, w) = mask.at(src(d, mask.dims.d, target.d), src(h, mask.dims.h, target.h),
                                  src(w, mask.dims.w, target.w));
  return out;
}

template <typename T>
Volume<T> one_hot(const std::vector<LabelMask>& masks, std::size_t num_classes) {
  if (masks.empty()) throw ConfigError("one_hot: empty batch");
  const Extent3 e = masks.front().dims;
  Volume<T> out(Shape5{masks.size(), e.d, e.h, e.w, num_classes});
  for (std::size_t b = 0; b < masks.size(); ++b) {
    if (!(masks[b].dims == e)) throw ConfigError("one_hot: masks differ in extent");
    check_labels(masks[b], num_classes);
    for (std::size_t v = 0; v < e.voxels(); ++v)
      out[(b * e.voxels() + v) * num_classes + masks[b].labels[v]] = T(1);
  }
  return out;
}

template <typename T>
LabelMask argmax_labels(const Volume<T>& scores, std::size_t b) {
  const Shape5& s = scores.shape();
  LabelMask out(spatial(s));
  for (std::size_t v = 0; v < s.voxels(); ++v) {
    const T* p = scores.data().data() + (b * s.voxels() + v) * s.c;
    std::size_t best = 0;
    for (std::size_t c = 1; c < s.c; ++c)
      if (p[c] > p[best]) best = c;
    out.labels[v] = static_cast<std::uint8_t>(best);
  }
  return out;
}

template Volume<float> one_hot<float>(const std::vector<LabelMask>&, std::size_t);
template Volume<double> one_hot<double>(const std::vector<LabelMask>&, std::size_t);
template LabelMask argmax_labels<float>(const Volume<float>&, std::size_t);
template LabelMask argmax_labels<double>(const Volume<double>&, std::size_t);

}  // namespace amber
