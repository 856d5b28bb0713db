#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "amber/tensor.hpp"

namespace amber {

/// Unnormalized 1D complex DFT of a fixed length. Power-of-two lengths use an
/// iterative radix-2 Cooley-Tukey pass; other lengths go through Bluestein's
/// chirp-z algorithm on a padded power-of-two transform.
template <typename T>
class Fft1d {
 public:
  explicit Fft1d(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  /// X[k] = sum_n x[n] exp(-2 pi i k n / N), in place.
  void forward(std::span<std::complex<T>> data) const;
  /// x[n] = sum_k X[k] exp(+2 pi i k n / N), in place, no 1/N.
  void inverse(std::span<std::complex<T>> data) const;

 private:
  void radix2(std::span<std::complex<T>> data) const;
  void bluestein(std::span<std::complex<T>> data) const;

  std::size_t n_;
  bool pow2_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<T>> twiddles_;  // exp(-2 pi i k / n), k < n/2
  // Bluestein state
  std::unique_ptr<Fft1d<T>> padded_;
  std::vector<std::complex<T>> chirp_;          // exp(-i pi k^2 / n)
  std::vector<std::complex<T>> chirp_filter_;   // FFT of conj chirp, padded
};

enum class FftDirection { forward, inverse };

/// Real 3D transform over the spatial axes of a (B, D, H, W, C) volume.
/// Forward is unnormalized; inverse scales by 1 / (D H W). W must be even or 1.
template <typename T>
class FftPlan3 {
 public:
  explicit FftPlan3(const Extent3& dims);

  const Extent3& dims() const noexcept { return dims_; }
  std::size_t half_width() const noexcept { return dims_.w / 2 + 1; }
  double inverse_scale() const noexcept { return 1.0 / static_cast<double>(dims_.voxels()); }

  ComplexVolume<T> rfft(const Volume<T>& x) const;
  Volume<T> irfft(const ComplexVolume<T>& spectrum) const;

  /// Gradient of a real loss through rfft: given dL/dRe + i dL/dIm per half-spectrum
  /// bin, returns dL/dx. Equals V * irfft(G / c) with c = 2 on interior width bins.
  Volume<T> rfft_adjoint(const ComplexVolume<T>& grad_spectrum) const;
  /// Gradient through irfft: (c / V) * rfft(g).
  ComplexVolume<T> irfft_adjoint(const Volume<T>& grad) const;

  /// Multiplicity of width bin k in the implied full spectrum (1 or 2).
  double width_multiplicity(std::size_t k) const noexcept;

 private:
  Extent3 dims_;
  Fft1d<T> fd_;
  Fft1d<T> fh_;
  Fft1d<T> fw_;
};

/// Throws ConfigError unless width is even or 1.
void check_fft_width(std::size_t width);

template <typename T>
ComplexVolume<T> rfft3(const Volume<T>& x);

/// `original_width` disambiguates W from W/2 + 1.
template <typename T>
Volume<T> irfft3(const ComplexVolume<T>& spectrum, std::size_t original_width);

}  // namespace amber
