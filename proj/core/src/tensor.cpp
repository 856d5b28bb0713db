#include "amber/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace amber {

std::string Shape5::str() const {
  std::ostringstream os;
  os << '(' << b << ", " << d << ", " << h << ", " << w << ", " << c << ')';
  return os.str();
}

std::string Extent3::str() const {
  std::ostringstream os;
  os << d << 'x' << h << 'x' << w;
  return os.str();
}

std::size_t product(std::span<const std::size_t> extents) {
  return std::accumulate(extents.begin(), extents.end(), std::size_t{1},
                         std::multiplies<std::size_t>());
}

std::string shape_string(std::span<const std::size_t> extents) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < extents.size(); ++i) {
    if (i) os << ", ";
    os << extents[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(std::vector<std::size_t> shape, T fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(std::vector<std::size_t> shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != product(shape_)) {
    throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                      " does not match shape " + shape_string(shape_));
  }
}

template <typename T>
Volume<T> concat_channels(std::span<const Volume<T>> parts) {
  if (parts.empty()) throw ConfigError("concat_channels: no inputs");
  Shape5 out = parts[0].shape();
  out.c = 0;
  for (const auto& p : parts) {
    const Shape5& s = p.shape();
    if (s.b != out.b || s.d != out.d || s.h != out.h || s.w != out.w) {
      throw ConfigError("concat_channels: spatial shape mismatch " + s.str() + " vs " +
                        parts[0].shape().str());
    }
    out.c += s.c;
  }
  Volume<T> y(out);
  const std::size_t positions = out.b * out.voxels();
  for (std::size_t p = 0; p < positions; ++p) {
    std::size_t offset = 0;
    for (const auto& part : parts) {
      const std::size_t c = part.shape().c;
      const T* src = part.data().data() + p * c;
      T* dst = y.data().data() + p * out.c + offset;
      std::copy(src, src + c, dst);
      offset += c;
    }
  }
  return y;
}

template <typename T>
std::vector<Volume<T>> split_channels(const Volume<T>& x, std::span<const std::size_t> widths) {
  const Shape5& s = x.shape();
  std::size_t total = std::accumulate(widths.begin(), widths.end(), std::size_t{0});
  if (total != s.c) {
    throw ConfigError("split_channels: widths sum " + std::to_string(total) +
                      " != channel count " + std::to_string(s.c));
  }
  std::vector<Volume<T>> parts;
  parts.reserve(widths.size());
  for (std::size_t wdt : widths) parts.emplace_back(Shape5{s.b, s.d, s.h, s.w, wdt});
  const std::size_t positions = s.b * s.voxels();
  for (std::size_t p = 0; p < positions; ++p) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const T* src = x.data().data() + p * s.c + offset;
      std::copy(src, src + widths[i], parts[i].data().data() + p * widths[i]);
      offset += widths[i];
    }
  }
  return parts;
}

template <typename T>
Volume<T> add(const Volume<T>& a, const Volume<T>& b) {
  Volume<T> y = a;
  add_inplace(y, b);
  return y;
}

template <typename T>
void add_inplace(Volume<T>& acc, const Volume<T>& x) {
  if (!(acc.shape() == x.shape())) {
    throw ConfigError("add: shape mismatch " + acc.shape().str() + " vs " + x.shape().str());
  }
  auto dst = acc.data();
  auto src = x.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
Volume<T> scale(const Volume<T>& a, T factor) {
  Volume<T> y = a;
  for (auto& v : y.data()) v *= factor;
  return y;
}

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

#define AMBER_INSTANTIATE(T)                                                              \
  template class Tensor<T>;                                                               \
  template Volume<T> concat_channels<T>(std::span<const Volume<T>>);                      \
  template std::vector<Volume<T>> split_channels<T>(const Volume<T>&,                     \
                                                    std::span<const std::size_t>);        \
  template Volume<T> add<T>(const Volume<T>&, const Volume<T>&);                          \
  template void add_inplace<T>(Volume<T>&, const Volume<T>&);                             \
  template Volume<T> scale<T>(const Volume<T>&, T);                                       \
  template bool all_finite<T>(std::span<const T>);

AMBER_INSTANTIATE(float)
AMBER_INSTANTIATE(double)
#undef AMBER_INSTANTIATE

}  // namespace amber
