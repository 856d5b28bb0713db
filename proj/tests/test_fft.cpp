#include <gtest/gtest.h>

#include <numbers>

#include "amber/fft.hpp"
#include "test_support.hpp"

using namespace amber;
using namespace amber::testing;
using cd = std::complex<double>;

namespace {

// Direct O(V^2) half-spectrum DFT.
ComplexVolume<double> naive_rfft3(const Volume<double>& x) {
  const Shape5 s = x.shape();
  const std::size_t wf = s.w / 2 + 1;
  ComplexVolume<double> out(Shape5{s.b, s.d, s.h, wf, s.c});
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t kd = 0; kd < s.d; ++kd)
      for (std::size_t kh = 0; kh < s.h; ++kh)
        for (std::size_t kw = 0; kw < wf; ++kw)
          for (std::size_t c = 0; c < s.c; ++c) {
            cd acc = 0.0;
            for (std::size_t d = 0; d < s.d; ++d)
              for (std::size_t h = 0; h < s.h; ++h)
                for (std::size_t w = 0; w < s.w; ++w) {
                  const double phase = -two_pi * (double(kd * d) / double(s.d) +
                                                  double(kh * h) / double(s.h) +
                                                  double(kw * w) / double(s.w));
                  acc += x.at(b, d, h, w, c) * std::polar(1.0, phase);
                }
            out.at(b, kd, kh, kw, c) = acc;
          }
  return out;
}

// Expands the half spectrum by conjugate symmetry and applies a direct inverse DFT.
Volume<double> naive_full_inverse(const ComplexVolume<double>& half, std::size_t width) {
  const Shape5 s = half.shape();
  const double two_pi = 2.0 * std::numbers::pi;
  auto full = [&](std::size_t b, std::size_t kd, std::size_t kh, std::size_t kw, std::size_t c) {
    if (kw < s.w) return half.at(b, kd, kh, kw, c);
    return std::conj(half.at(b, (s.d - kd) % s.d, (s.h - kh) % s.h, width - kw, c));
  };
  Volume<double> out(Shape5{s.b, s.d, s.h, width, s.c});
  const double v = double(s.d * s.h * width);
  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t d = 0; d < s.d; ++d)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t w = 0; w < width; ++w)
          for (std::size_t c = 0; c < s.c; ++c) {
            cd acc = 0.0;
            for (std::size_t kd = 0; kd < s.d; ++kd)
              for (std::size_t kh = 0; kh < s.h; ++kh)
                for (std::size_t kw = 0; kw < width; ++kw) {
                  const double phase = two_pi * (double(kd * d) / double(s.d) +
                                                 double(kh * h) / double(s.h) +
                                                 double(kw * w) / double(width));
                  acc += full(b, kd, kh, kw, c) * std::polar(1.0, phase);
                }
            out.at(b, d, h, w, c) = acc.real() / v;
          }
  return out;
}

double max_abs_complex(const ComplexVolume<double>& a, const ComplexVolume<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double real_inner(const ComplexVolume<double>& a, const ComplexVolume<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return s;
}

const std::vector<std::size_t> kDepths{1, 2, 3, 4, 8};
const std::vector<std::size_t> kWidths{2, 4, 8};

}  // namespace

TEST(Rfft3, ConstantInputHasOnlyDc) {
  Volume<double> x(Shape5{1, 2, 2, 2, 1}, 1.0);
  const auto X = rfft3(x);
  ASSERT_EQ(X.shape(), (Shape5{1, 2, 2, 2, 1}));
  EXPECT_EQ(X[0], cd(8.0, 0.0));
  for (std::size_t i = 1; i < X.size(); ++i) EXPECT_LT(std::abs(X[i]), 1e-15);
}

TEST(Rfft3, ImpulseHasFlatSpectrum) {
  Volume<double> x(Shape5{1, 4, 2, 4, 1});
  x[0] = 1.0;
  const auto X = rfft3(x);
  for (const cd& v : X.data()) EXPECT_LT(std::abs(v - cd(1.0, 0.0)), 1e-15);
}

TEST(Rfft3, MatchesNaiveDft) {
  std::mt19937_64 rng(21);
  const auto x = random_volume<double>({1, 4, 4, 4, 1}, rng);
  EXPECT_LT(max_abs_complex(rfft3(x), naive_rfft3(x)), 1e-10);
}

TEST(Rfft3, MatchesNaiveDftAcrossShapes) {
  std::mt19937_64 rng(22);
  for (std::size_t d : kDepths)
    for (std::size_t h : kDepths)
      for (std::size_t w : kWidths) {
        const auto x = random_volume<double>({2, d, h, w, 2}, rng);
        EXPECT_LT(max_abs_complex(rfft3(x), naive_rfft3(x)), 1e-10)
            << d << "x" << h << "x" << w;
      }
}

TEST(Rfft3, IsLinear) {
  std::mt19937_64 rng(23);
  const auto x = random_volume<double>({1, 3, 4, 8, 2}, rng);
  const auto y = random_volume<double>({1, 3, 4, 8, 2}, rng);
  const double a = -2.3;
  Volume<double> combo(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) combo[i] = a * x[i] + y[i];
  const auto lhs = rfft3(combo);
  const auto fx = rfft3(x);
  const auto fy = rfft3(y);
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    const cd rhs = a * fx[i] + fy[i];
    EXPECT_LE(std::abs(lhs[i] - rhs), 1e-10 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(Rfft3, RejectsOddWidth) {
  Volume<double> x(Shape5{1, 2, 2, 3, 1});
  EXPECT_THROW(rfft3(x), ConfigError);
  EXPECT_THROW(check_fft_width(5), ConfigError);
}

TEST(Irfft3, RoundTripAcrossShapes) {
  std::mt19937_64 rng(24);
  for (std::size_t d : kDepths)
    for (std::size_t h : kDepths)
      for (std::size_t w : kWidths) {
        const auto x = random_volume<double>({1, d, h, w, 3}, rng);
        EXPECT_LT(max_abs_diff(irfft3(rfft3(x), w), x), 1e-10) << d << "x" << h << "x" << w;
      }
}

TEST(Irfft3, DcOnlySpectrumGivesConstant) {
  ComplexVolume<double> X(Shape5{1, 2, 4, 3, 1});
  const double c = -1.25;
  X[0] = cd(c * 2 * 4 * 4, 0.0);
  const auto y = irfft3(X, 4);
  for (double v : y.data()) EXPECT_NEAR(v, c, 1e-14);
}

TEST(Irfft3, RejectsInconsistentHalfWidth) {
  ComplexVolume<double> X(Shape5{1, 2, 2, 3, 1});
  EXPECT_THROW(irfft3(X, 8), ConfigError);
}

TEST(Irfft3, ParsevalAcrossShapes) {
  std::mt19937_64 rng(25);
  for (std::size_t d : kDepths)
    for (std::size_t h : kDepths)
      for (std::size_t w : kWidths) {
        const auto x = random_volume<double>({1, d, h, w, 1}, rng);
        const auto X = rfft3(x);
        double energy = 0.0;
        for (double v : x.data()) energy += v * v;
        double spectral = 0.0;
        for (std::size_t kd = 0; kd < d; ++kd)
          for (std::size_t kh = 0; kh < h; ++kh)
            for (std::size_t kw = 0; kw < w / 2 + 1; ++kw) {
              const double mult = (kw == 0 || 2 * kw == w) ? 1.0 : 2.0;
              spectral += mult * std::norm(X.at(0, kd, kh, kw, 0));
            }
        spectral /= double(d * h * w);
        EXPECT_LT(rel_diff(energy, spectral), 1e-10) << d << "x" << h << "x" << w;
      }
}

TEST(Irfft3, MatchesHermitianExpandedFullInverse) {
  std::mt19937_64 rng(26);
  for (std::size_t d : {1, 3, 4})
    for (std::size_t w : kWidths) {
      const auto x = random_volume<double>({1, d, 2, w, 2}, rng);
      const auto X = rfft3(x);
      EXPECT_LT(max_abs_diff(irfft3(X, w), naive_full_inverse(X, w)), 1e-10);
    }
}

TEST(FftAdjoint, RfftAdjointIdentity) {
  std::mt19937_64 rng(27);
  for (std::size_t d : {1, 3, 4})
    for (std::size_t w : kWidths) {
      const Extent3 e{d, 4, w};
      const FftPlan3<double> plan(e);
      const auto x = random_volume<double>({2, d, 4, w, 2}, rng);
      ComplexVolume<double> y(Shape5{2, d, 4, w / 2 + 1, 2});
      const auto r = random_complex<double>(y.size(), rng);
      std::copy(r.begin(), r.end(), y.storage().begin());
      const double lhs = real_inner(plan.rfft(x), y);
      const auto adj = plan.rfft_adjoint(y);
      EXPECT_LT(rel_diff(lhs, dot<double>(x.data(), adj.data())), 1e-10);
    }
}

TEST(FftAdjoint, IrfftAdjointIdentity) {
  std::mt19937_64 rng(28);
  for (std::size_t w : kWidths) {
    const Extent3 e{3, 2, w};
    const FftPlan3<double> plan(e);
    ComplexVolume<double> y(Shape5{1, 3, 2, w / 2 + 1, 3});
    const auto r = random_complex<double>(y.size(), rng);
    std::copy(r.begin(), r.end(), y.storage().begin());
    const auto z = random_volume<double>({1, 3, 2, w, 3}, rng);
    const double lhs = dot<double>(plan.irfft(y).data(), z.data());
    EXPECT_LT(rel_diff(lhs, real_inner(y, plan.irfft_adjoint(z))), 1e-10);
  }
}

TEST(Fft1d, BluesteinMatchesDirectDftForPrimeLengths) {
  std::mt19937_64 rng(29);
  for (std::size_t n : {3, 5, 7, 11, 12, 17}) {
    const Fft1d<double> fft(n);
    auto data = random_complex<double>(n, rng);
    const auto orig = data;
    fft.forward(data);
    for (std::size_t k = 0; k < n; ++k) {
      cd acc = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        acc += orig[j] * std::polar(1.0, -2.0 * std::numbers::pi * double(j * k) / double(n));
      EXPECT_LT(std::abs(acc - data[k]), 1e-12) << "n=" << n;
    }
  }
}
