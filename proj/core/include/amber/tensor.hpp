#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "amber/error.hpp"

namespace amber {

/// Extents of a 5-axis activation: batch, depth, height, width, channels.
struct Shape5 {
  std::size_t b = 0;
  std::size_t d = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t c = 0;

  std::size_t voxels() const noexcept { return d * h * w; }
  std::size_t size() const noexcept { return b * d * h * w * c; }
  bool operator==(const Shape5&) const = default;
  std::string str() const;
};

/// Spatial extents only (D, H, W).
struct Extent3 {
  std::size_t d = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t voxels() const noexcept { return d * h * w; }
  bool operator==(const Extent3&) const = default;
  std::string str() const;
};

inline Extent3 spatial(const Shape5& s) { return {s.d, s.h, s.w}; }

/// Dense row-major (batch outermost, channel innermost) tensor of rank 5.
template <typename E>
class BasicVolume {
 public:
  using value_type = E;

  BasicVolume() = default;
  explicit BasicVolume(const Shape5& shape, E fill = E{})
      : shape_(shape), data_(shape.size(), fill) {}
  BasicVolume(const Shape5& shape, std::vector<E> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ConfigError("volume data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_.str());
    }
  }

  const Shape5& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<E> data() noexcept { return data_; }
  std::span<const E> data() const noexcept { return data_; }
  const std::vector<E>& storage() const noexcept { return data_; }
  std::vector<E>& storage() noexcept { return data_; }

  std::size_t index(std::size_t b, std::size_t d, std::size_t h, std::size_t w,
                    std::size_t c) const noexcept {
    return (((b * shape_.d + d) * shape_.h + h) * shape_.w + w) * shape_.c + c;
  }
  E& at(std::size_t b, std::size_t d, std::size_t h, std::size_t w, std::size_t c) noexcept {
    return data_[index(b, d, h, w, c)];
  }
  const E& at(std::size_t b, std::size_t d, std::size_t h, std::size_t w,
              std::size_t c) const noexcept {
    return data_[index(b, d, h, w, c)];
  }
  E& operator[](std::size_t i) noexcept { return data_[i]; }
  const E& operator[](std::size_t i) const noexcept { return data_[i]; }

 private:
  Shape5 shape_;
  std::vector<E> data_;
};

template <typename T>
using Volume = BasicVolume<T>;

/// Half-spectrum produced by rfft3; width axis holds W/2 + 1 bins.
template <typename T>
using ComplexVolume = BasicVolume<std::complex<T>>;

/// Arbitrary-rank dense tensor used for parameters (kernels, matrices).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, T fill = T{0});
  Tensor(std::vector<std::size_t> shape, std::vector<T> data);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

std::size_t product(std::span<const std::size_t> extents);
std::string shape_string(std::span<const std::size_t> extents);

/// Channel-axis concatenation; all parts must agree on (B, D, H, W).
template <typename T>
Volume<T> concat_channels(std::span<const Volume<T>> parts);

/// Inverse of concat_channels for the given channel widths.
template <typename T>
std::vector<Volume<T>> split_channels(const Volume<T>& x, std::span<const std::size_t> widths);

template <typename T>
Volume<T> add(const Volume<T>& a, const Volume<T>& b);

template <typename T>
void add_inplace(Volume<T>& acc, const Volume<T>& x);

template <typename T>
Volume<T> scale(const Volume<T>& a, T factor);

template <typename T>
bool all_finite(std::span<const T> values);

template <typename To, typename From>
Volume<To> cast_volume(const Volume<From>& x) {
  std::vector<To> out(x.data().begin(), x.data().end());
  return Volume<To>(x.shape(), std::move(out));
}

}  // namespace amber
