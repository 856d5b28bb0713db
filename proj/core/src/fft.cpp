#include "amber/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace amber {

namespace {

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

template <typename T>
std::complex<T> unit_phase(long double angle) {
  return {static_cast<T>(std::cos(angle)), static_cast<T>(std::sin(angle))};
}

}  // namespace

template <typename T>
Fft1d<T>::Fft1d(std::size_t n) : n_(n), pow2_(is_pow2(n)) {
  if (n == 0) throw ConfigError("fft: zero length");
  constexpr long double kPi = std::numbers::pi_v<long double>;
  if (pow2_) {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    bitrev_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      bitrev_[i] = r;
    }
    twiddles_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k)
      twiddles_[k] = unit_phase<T>(-2.0L * kPi * static_cast<long double>(k) /
                                   static_cast<long double>(n));
    return;
  }
  const std::size_t m = next_pow2(2 * n - 1);
  padded_ = std::make_unique<Fft1d<T>>(m);
  chirp_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle small and exact.
    const std::size_t k2 = (k * k) % (2 * n);
    chirp_[k] = unit_phase<T>(-kPi * static_cast<long double>(k2) / static_cast<long double>(n));
  }
  chirp_filter_.assign(m, {});
  chirp_filter_[0] = std::conj(chirp_[0]);
  for (std::size_t k = 1; k < n; ++k) {
    chirp_filter_[k] = std::conj(chirp_[k]);
    chirp_filter_[m - k] = std::conj(chirp_[k]);
  }
  padded_->forward(chirp_filter_);
}

template <typename T>
void Fft1d<T>::radix2(std::span<std::complex<T>> a) const {
  const std::size_t n = n_;
  for (std::size_t i = 0; i < n; ++i)
    if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::complex<T> u = a[start + j];
        const std::complex<T> v = a[start + j + half] * twiddles_[j * step];
        a[start + j] = u + v;
        a[start + j + half] = u - v;
      }
    }
  }
}

template <typename T>
void Fft1d<T>::bluestein(std::span<std::complex<T>> a) const {
  const std::size_t m = padded_->size();
  std::vector<std::complex<T>> buf(m);
  for (std::size_t k = 0; k < n_; ++k) buf[k] = a[k] * chirp_[k];
  padded_->forward(buf);
  for (std::size_t k = 0; k < m; ++k) buf[k] *= chirp_filter_[k];
  padded_->inverse(buf);
  const T inv_m = T(1) / static_cast<T>(m);
  for (std::size_t k = 0; k < n_; ++k) a[k] = buf[k] * inv_m * chirp_[k];
}

template <typename T>
void Fft1d<T>::forward(std::span<std::complex<T>> data) const {
  if (data.size() != n_) throw ConfigError("fft: buffer length mismatch");
  if (n_ == 1) return;
  if (pow2_) {
    radix2(data);
  } else {
    bluestein(data);
  }
}

template <typename T>
void Fft1d<T>::inverse(std::span<std::complex<T>> data) const {
  for (auto& v : data) v = std::conj(v);
  forward(data);
  for (auto& v : data) v = std::conj(v);
}

void check_fft_width(std::size_t width) {
  if (width != 1 && width % 2 != 0) {
    throw ConfigError("rfft3: width " + std::to_string(width) +
                      " is odd; pad width to even before the spectral transform");
  }
}

template <typename T>
FftPlan3<T>::FftPlan3(const Extent3& dims)
    : dims_(dims), fd_(dims.d), fh_(dims.h), fw_(dims.w) {
  if (dims.d < 1 || dims.h < 1 || dims.w < 1) throw ConfigError("rfft3: empty spatial extent");
  check_fft_width(dims.w);
}

template <typename T>
double FftPlan3<T>::width_multiplicity(std::size_t k) const noexcept {
  if (k == 0) return 1.0;
  if (dims_.w % 2 == 0 && k == dims_.w / 2) return 1.0;
  return 2.0;
}

template <typename T>
ComplexVolume<T> FftPlan3<T>::rfft(const Volume<T>& x) const {
  const Shape5& s = x.shape();
  if (!(spatial(s) == dims_)) {
    throw ConfigError("rfft3: volume spatial shape " + spatial(s).str() + " != plan " +
                      dims_.str());
  }
  const std::size_t D = s.d, H = s.h, W = s.w, C = s.c, Wf = half_width();
  ComplexVolume<T> out(Shape5{s.b, D, H, Wf, C});
  std::vector<std::complex<T>> slab(D * H * Wf);
  std::vector<std::complex<T>> line(std::max({D, H, W}));
  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t h = 0; h < H; ++h) {
          std::span<std::complex<T>> lw(line.data(), W);
          for (std::size_t w = 0; w < W; ++w) lw[w] = {x.at(b, d, h, w, c), T(0)};
          fw_.forward(lw);
          for (std::size_t k = 0; k < Wf; ++k) slab[(d * H + h) * Wf + k] = lw[k];
        }
      if (H > 1) {
        std::span<std::complex<T>> lh(line.data(), H);
        for (std::size_t d = 0; d < D; ++d)
          for (std::size_t k = 0; k < Wf; ++k) {
            for (std::size_t h = 0; h < H; ++h) lh[h] = slab[(d * H + h) * Wf + k];
            fh_.forward(lh);
            for (std::size_t h = 0; h < H; ++h) slab[(d * H + h) * Wf + k] = lh[h];
          }
      }
      if (D > 1) {
        std::span<std::complex<T>> ld(line.data(), D);
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t k = 0; k < Wf; ++k) {
            for (std::size_t d = 0; d < D; ++d) ld[d] = slab[(d * H + h) * Wf + k];
            fd_.forward(ld);
            for (std::size_t d = 0; d < D; ++d) slab[(d * H + h) * Wf + k] = ld[d];
          }
      }
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t k = 0; k < Wf; ++k) out.at(b, d, h, k, c) = slab[(d * H + h) * Wf + k];
    }
  return out;
}

template <typename T>
Volume<T> FftPlan3<T>::irfft(const ComplexVolume<T>& spectrum) const {
  const Shape5& s = spectrum.shape();
  const std::size_t D = dims_.d, H = dims_.h, W = dims_.w, C = s.c, Wf = half_width();
  if (s.d != D || s.h != H || s.w != Wf) {
    throw ConfigError("irfft3: spectrum shape " + s.str() + " inconsistent with width " +
                      std::to_string(W) + " (expected " + std::to_string(Wf) + " bins)");
  }
  Volume<T> out(Shape5{s.b, D, H, W, C});
  const T scale = static_cast<T>(inverse_scale());
  std::vector<std::complex<T>> slab(D * H * Wf);
  std::vector<std::complex<T>> line(std::max({D, H, W}));
  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t k = 0; k < Wf; ++k) slab[(d * H + h) * Wf + k] = spectrum.at(b, d, h, k, c);
      if (D > 1) {
        std::span<std::complex<T>> ld(line.data(), D);
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t k = 0; k < Wf; ++k) {
            for (std::size_t d = 0; d < D; ++d) ld[d] = slab[(d * H + h) * Wf + k];
            fd_.inverse(ld);
            for (std::size_t d = 0; d < D; ++d) slab[(d * H + h) * Wf + k] = ld[d];
          }
      }
      if (H > 1) {
        std::span<std::complex<T>> lh(line.data(), H);
        for (std::size_t d = 0; d < D; ++d)
          for (std::size_t k = 0; k < Wf; ++k) {
            for (std::size_t h = 0; h < H; ++h) lh[h] = slab[(d * H + h) * Wf + k];
            fh_.inverse(lh);
            for (std::size_t h = 0; h < H; ++h) slab[(d * H + h) * Wf + k] = lh[h];
          }
      }
      std::span<std::complex<T>> lw(line.data(), W);
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t h = 0; h < H; ++h) {
          const std::complex<T>* z = &slab[(d * H + h) * Wf];
          for (std::size_t k = 0; k < W; ++k) lw[k] = k < Wf ? z[k] : std::conj(z[W - k]);
          fw_.inverse(lw);
          for (std::size_t w = 0; w < W; ++w) out.at(b, d, h, w, c) = lw[w].real() * scale;
        }
    }
  return out;
}

template <typename T>
Volume<T> FftPlan3<T>::rfft_adjoint(const ComplexVolume<T>& grad_spectrum) const {
  ComplexVolume<T> folded = grad_spectrum;
  const Shape5& s = folded.shape();
  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t d = 0; d < s.d; ++d)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t k = 0; k < s.w; ++k) {
          const T inv_c = static_cast<T>(1.0 / width_multiplicity(k));
          std::complex<T>* p = &folded.at(b, d, h, k, 0);
          for (std::size_t c = 0; c < s.c; ++c) p[c] *= inv_c;
        }
  Volume<T> x = irfft(folded);
  const T v = static_cast<T>(dims_.voxels());
  for (auto& e : x.data()) e *= v;
  return x;
}

template <typename T>
ComplexVolume<T> FftPlan3<T>::irfft_adjoint(const Volume<T>& grad) const {
  ComplexVolume<T> g = rfft(grad);
  const Shape5& s = g.shape();
  const double inv_v = inverse_scale();
  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t d = 0; d < s.d; ++d)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t k = 0; k < s.w; ++k) {
          const T f = static_cast<T>(width_multiplicity(k) * inv_v);
          std::complex<T>* p = &g.at(b, d, h, k, 0);
          for (std::size_t c = 0; c < s.c; ++c) p[c] *= f;
        }
  return g;
}

template <typename T>
ComplexVolume<T> rfft3(const Volume<T>& x) {
  return FftPlan3<T>(spatial(x.shape())).rfft(x);
}

template <typename T>
Volume<T> irfft3(const ComplexVolume<T>& spectrum, std::size_t original_width) {
  const Shape5& s = spectrum.shape();
  check_fft_width(original_width);
  if (s.w != original_width / 2 + 1) {
    throw ConfigError("irfft3: spectrum has " + std::to_string(s.w) + " width bins but width " +
                      std::to_string(original_width) + " implies " +
                      std::to_string(original_width / 2 + 1));
  }
  return FftPlan3<T>(Extent3{s.d, s.h, original_width}).irfft(spectrum);
}

template class Fft1d<float>;
template class Fft1d<double>;
template class FftPlan3<float>;
template class FftPlan3<double>;
template ComplexVolume<float> rfft3<float>(const Volume<float>&);
template ComplexVolume<double> rfft3<double>(const Volume<double>&);
template Volume<float> irfft3<float>(const ComplexVolume<float>&, std::size_t);
template Volume<double> irfft3<double>(const ComplexVolume<double>&, std::size_t);

}  // namespace amber
