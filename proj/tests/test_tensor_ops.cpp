#include <gtest/gtest.h>

#include "amber/ops.hpp"
#include "test_support.hpp"

using namespace amber;
using namespace amber::testing;

namespace {

// Direct nested-loop convolution; weights (Kd, Kh, Kw, Cin/g, Cout).
Volume<double> reference_conv(const Volume<double>& x, const Tensor<double>& w,
                              const std::vector<double>& bias, const ConvSpec& s) {
  const Shape5 in = x.shape();
  const Extent3 oe = s.output_extent(spatial(in));
  Volume<double> y(Shape5{in.b, oe.d, oe.h, oe.w, s.out_channels});
  const std::size_t cin_g = s.in_channels / s.groups;
  const std::size_t cout_g = s.out_channels / s.groups;
  for (std::size_t b = 0; b < in.b; ++b)
    for (std::size_t od = 0; od < oe.d; ++od)
      for (std::size_t oh = 0; oh < oe.h; ++oh)
        for (std::size_t ow = 0; ow < oe.w; ++ow)
          for (std::size_t co = 0; co < s.out_channels; ++co) {
            double acc = bias.empty() ? 0.0 : bias[co];
            const std::size_t g = co / cout_g;
            for (std::size_t kd = 0; kd < s.kernel[0]; ++kd)
              for (std::size_t kh = 0; kh < s.kernel[1]; ++kh)
                for (std::size_t kw = 0; kw < s.kernel[2]; ++kw)
                  for (std::size_t ci = 0; ci < cin_g; ++ci) {
                    const long id = long(od * s.stride + kd) - long(s.padding);
                    const long ih = long(oh * s.stride + kh) - long(s.padding);
                    const long iw = long(ow * s.stride + kw) - long(s.padding);
                    if (id < 0 || ih < 0 || iw < 0 || id >= long(in.d) || ih >= long(in.h) ||
                        iw >= long(in.w))
                      continue;
                    const std::size_t widx =
                        (((kd * s.kernel[1] + kh) * s.kernel[2] + kw) * cin_g + ci) *
                            s.out_channels +
                        co;
                    acc += w[widx] * x.at(b, id, ih, iw, g * cin_g + ci);
                  }
            y.at(b, od, oh, ow, co) = acc;
          }
  return y;
}

}  // namespace

TEST(Conv3d, AllOnesBoxSumGivesInteriorAndCornerCounts) {
  const auto spec = ConvSpec::cube(3, 1, 1, 1, 1);
  Volume<double> x(Shape5{1, 4, 4, 4, 1}, 1.0);
  Tensor<double> w(conv_weight_shape(spec), 1.0);
  const std::vector<double> bias{0.0};
  const auto y = conv3d<double>(x, w, bias, spec);
  ASSERT_EQ(y.shape(), (Shape5{1, 4, 4, 4, 1}));
  EXPECT_EQ(y.at(0, 1, 1, 1, 0), 27.0);
  EXPECT_EQ(y.at(0, 2, 2, 1, 0), 27.0);
  EXPECT_EQ(y.at(0, 0, 0, 0, 0), 8.0);
  EXPECT_EQ(y.at(0, 3, 3, 3, 0), 8.0);
}

TEST(Conv3d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(1);
  const auto spec = ConvSpec::cube(1, 1, 0, 1, 1);
  const auto x = random_volume<double>({2, 3, 4, 2, 1}, rng);
  Tensor<double> w(conv_weight_shape(spec), 1.0);
  const auto y = conv3d<double>(x, w, {}, spec);
  EXPECT_EQ(max_abs_diff(x, y), 0.0);
}

TEST(Conv3d, MatchesNestedLoopReference) {
  std::mt19937_64 rng(2);
  const auto spec = ConvSpec::cube(3, 1, 1, 2, 3);
  const auto x = random_volume<double>({1, 5, 5, 5, 2}, rng);
  const auto w = random_tensor<double>(conv_weight_shape(spec), rng);
  const auto bias = random_vector<double>(3, rng);
  EXPECT_LT(max_abs_diff(conv3d<double>(x, w, bias, spec), reference_conv(x, w, bias, spec)), 1e-6);
}

TEST(Conv3d, MatchesReferenceAcrossStridesPaddingsAndGroups) {
  std::mt19937_64 rng(3);
  for (std::size_t k = 1; k <= 4; ++k)
    for (std::size_t s = 1; s <= 2; ++s)
      for (std::size_t p = 0; p <= 2; ++p)
        for (std::size_t g : {1, 2, 4}) {
          if (p >= k) continue;
          const auto spec = ConvSpec::cube(k, s, p, 4, 4, g);
          const auto x = random_volume<double>({2, 5, 4, 6, 4}, rng);
          const auto w = random_tensor<double>(conv_weight_shape(spec), rng);
          const auto bias = random_vector<double>(4, rng);
          const auto y = conv3d<double>(x, w, bias, spec);
          const Extent3 e = spatial(y.shape());
          EXPECT_EQ(e.d, (5 + 2 * p - k) / s + 1);
          EXPECT_EQ(e.h, (4 + 2 * p - k) / s + 1);
          EXPECT_EQ(e.w, (6 + 2 * p - k) / s + 1);
          EXPECT_LT(max_abs_diff(y, reference_conv(x, w, bias, spec)), 1e-12)
              << "k=" << k << " s=" << s << " p=" << p << " g=" << g;
        }
}

TEST(Conv3d, IsLinearWithoutBias) {
  std::mt19937_64 rng(4);
  const auto spec = ConvSpec::cube(3, 2, 1, 3, 5);
  const auto x = random_volume<double>({1, 6, 6, 6, 3}, rng);
  const auto z = random_volume<double>({1, 6, 6, 6, 3}, rng);
  const auto w = random_tensor<double>(conv_weight_shape(spec), rng);
  const double a = 1.7, b = -0.4;
  Volume<double> combo(x.shape());
  for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * x[i] + b * z[i];
  const auto lhs = conv3d<double>(combo, w, {}, spec);
  const auto cx = conv3d<double>(x, w, {}, spec);
  const auto cz = conv3d<double>(z, w, {}, spec);
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    const double rhs = a * cx[i] + b * cz[i];
    EXPECT_LE(std::abs(lhs[i] - rhs), 1e-6 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(Conv3d, RejectsKernelLargerThanPaddedInput) {
  Volume<double> x(Shape5{1, 2, 2, 2, 1}, 1.0);
  const auto spec = ConvSpec::cube(5, 1, 0, 1, 1);
  Tensor<double> w(conv_weight_shape(spec), 1.0);
  EXPECT_THROW(conv3d<double>(x, w, {}, spec), ConfigError);
}

TEST(ConvTransposed, KernelTwoStrideTwoDoublesExtent) {
  const auto spec = ConvSpec::cube(2, 2, 0, 1, 1);
  Volume<double> x(Shape5{1, 2, 2, 2, 1}, 1.0);
  Tensor<double> w(conv_transposed_weight_shape(spec), 1.0);
  const auto y = conv3d_transposed<double>(x, w, {}, spec);
  ASSERT_EQ(y.shape(), (Shape5{1, 4, 4, 4, 1}));
  for (double v : y.data()) EXPECT_EQ(v, 1.0);
}

TEST(ConvTransposed, ShapeFormulaHoldsForLegalSpecs) {
  for (std::size_t k = 1; k <= 4; ++k)
    for (std::size_t s = 1; s <= 2; ++s)
      for (std::size_t p = 0; p <= 2; ++p) {
        const auto spec = ConvSpec::cube(k, s, p, 1, 1);
        const std::size_t in = 3;
        const long expect = long((in - 1) * s + k) - long(2 * p);
        if (expect <= 0) {
          EXPECT_THROW(spec.transposed_output_extent({in, in, in}), ConfigError);
          continue;
        }
        EXPECT_EQ(spec.transposed_output_extent({in, in, in}).d, std::size_t(expect));
      }
}

TEST(ConvTransposed, EqualsConvInputGradient) {
  std::mt19937_64 rng(5);
  const auto conv_spec = ConvSpec::cube(3, 2, 1, 2, 3);
  const auto t_spec = ConvSpec::cube(3, 2, 1, 3, 2);
  const auto x = random_volume<double>({1, 5, 5, 5, 2}, rng);
  const auto w = random_tensor<double>(conv_weight_shape(conv_spec), rng);
  ASSERT_EQ(conv_weight_shape(conv_spec), conv_transposed_weight_shape(t_spec));
  const auto y = conv3d<double>(x, w, {}, conv_spec);
  const auto gy = random_volume<double>(y.shape(), rng);
  const auto via_backward = conv3d_backward<double>(x, w, conv_spec, gy).input;
  const auto via_transposed = conv3d_transposed<double>(gy, w, {}, t_spec);
  EXPECT_LT(max_abs_diff(via_backward, via_transposed), 1e-6);
}

TEST(ConvTransposed, IsAdjointOfConv) {
  std::mt19937_64 rng(6);
  const auto conv_spec = ConvSpec::cube(2, 2, 0, 3, 4);
  const auto t_spec = ConvSpec::cube(2, 2, 0, 4, 3);
  const auto x = random_volume<double>({2, 4, 6, 4, 3}, rng);
  const auto w = random_tensor<double>(conv_weight_shape(conv_spec), rng);
  const auto cx = conv3d<double>(x, w, {}, conv_spec);
  const auto y = random_volume<double>(cx.shape(), rng);
  const auto ty = conv3d_transposed<double>(y, w, {}, t_spec);
  ASSERT_EQ(ty.shape(), x.shape());
  EXPECT_LT(rel_diff(dot<double>(cx.data(), y.data()), dot<double>(x.data(), ty.data())), 1e-6);
}

TEST(Upsample, ConstantStaysConstant) {
  Volume<double> x(Shape5{1, 2, 3, 2, 2}, 3.5);
  const auto y = upsample_trilinear<double>(x, {4, 6, 4});
  ASSERT_EQ(y.shape(), (Shape5{1, 4, 6, 4, 2}));
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 3.5);
}

TEST(Upsample, SameTargetIsIdentity) {
  std::mt19937_64 rng(7);
  const auto x = random_volume<double>({1, 3, 2, 4, 3}, rng);
  EXPECT_EQ(max_abs_diff(upsample_trilinear<double>(x, {3, 2, 4}), x), 0.0);
}

TEST(Upsample, HalfPixelSamplingOnLine) {
  Volume<double> x(Shape5{1, 2, 1, 1, 1}, std::vector<double>{0.0, 1.0});
  const auto y = upsample_trilinear<double>(x, {4, 1, 1});
  ASSERT_EQ(y.size(), 4u);
  EXPECT_DOUBLE_EQ(y[0], 0.0);
  EXPECT_DOUBLE_EQ(y[1], 0.25);
  EXPECT_DOUBLE_EQ(y[2], 0.75);
  EXPECT_DOUBLE_EQ(y[3], 1.0);
}

TEST(Upsample, StaysWithinInputRange) {
  std::mt19937_64 rng(8);
  const auto x = random_volume<double>({2, 2, 3, 2, 2}, rng);
  const auto y = upsample_trilinear<double>(x, {8, 9, 4});
  const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
  for (double v : y.data()) {
    EXPECT_GE(v, *lo);
    EXPECT_LE(v, *hi);
  }
}

TEST(Upsample, BackwardIsAdjoint) {
  std::mt19937_64 rng(9);
  const auto x = random_volume<double>({1, 2, 2, 4, 2}, rng);
  const auto ux = upsample_trilinear<double>(x, {8, 4, 8});
  const auto g = random_volume<double>(ux.shape(), rng);
  const auto bg = upsample_trilinear_backward<double>(g, x.shape());
  EXPECT_LT(rel_diff(dot<double>(ux.data(), g.data()), dot<double>(x.data(), bg.data())), 1e-12);
}

TEST(Upsample, RejectsShrinkingTarget) {
  Volume<double> x(Shape5{1, 4, 4, 4, 1});
  EXPECT_THROW(upsample_trilinear<double>(x, {2, 4, 4}), ConfigError);
}

TEST(Norms, LayerNormOfTwoChannels) {
  Volume<double> x(Shape5{1, 1, 1, 1, 2}, std::vector<double>{1.0, 3.0});
  const std::vector<double> gamma{1.0, 1.0}, beta{0.0, 0.0};
  const auto y = layer_norm<double>(x, gamma, beta, 1e-5);
  EXPECT_NEAR(y[0], -1.0, 1e-5);
  EXPECT_NEAR(y[1], 1.0, 1e-5);
}

TEST(Norms, LayerNormStatistics) {
  std::mt19937_64 rng(10);
  const auto x = random_volume<double>({2, 3, 3, 2, 16}, rng, -3.0, 5.0);
  const std::vector<double> gamma(16, 1.0), beta(16, 0.0);
  const auto y = layer_norm<double>(x, gamma, beta, 1e-5);
  for (std::size_t v = 0; v < y.size() / 16; ++v) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 16; ++c) mean += y[v * 16 + c] / 16;
    for (std::size_t c = 0; c < 16; ++c) var += (y[v * 16 + c] - mean) * (y[v * 16 + c] - mean) / 16;
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_LT(std::abs(var - 1.0), 1e-4);
  }
}

TEST(Norms, BatchNormEvalWithUnitStatsIsIdentity) {
  std::mt19937_64 rng(11);
  const auto x = random_volume<double>({2, 2, 2, 2, 3}, rng);
  const std::vector<double> gamma(3, 1.0), beta(3, 0.0);
  BatchNormStats<double> running{std::vector<double>(3, 0.0), std::vector<double>(3, 1.0)};
  const auto y = batch_norm3d<double>(x, gamma, beta, running, 1e-5, false);
  EXPECT_LT(max_abs_diff(x, y), 1e-5);
}

TEST(Norms, BatchNormTrainingStatistics) {
  std::mt19937_64 rng(12);
  const auto x = random_volume<double>({2, 4, 3, 2, 3}, rng, -2.0, 6.0);
  const std::vector<double> gamma(3, 1.0), beta(3, 0.0);
  BatchNormStats<double> running{std::vector<double>(3, 0.0), std::vector<double>(3, 1.0)};
  const auto y = batch_norm3d<double>(x, gamma, beta, running, 1e-5, true);
  const std::size_t n = y.size() / 3;
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += y[i * 3 + c] / double(n);
    for (std::size_t i = 0; i < n; ++i) var += (y[i * 3 + c] - mean) * (y[i * 3 + c] - mean) / double(n);
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_LT(std::abs(var - 1.0), 1e-4);
  }
}

TEST(Activations, ZeroAndNegativeValues) {
  EXPECT_EQ(gelu_scalar(0.0), 0.0);
  Volume<double> x(Shape5{1, 1, 1, 1, 1}, -2.0);
  EXPECT_EQ(relu(x)[0], 0.0);
}

TEST(Activations, SoftmaxOfEqualLogitsIsUniform) {
  Volume<double> x(Shape5{1, 2, 1, 1, 4}, 0.7);
  const auto p = softmax_channels(x);
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Activations, SoftmaxSumsToOne) {
  std::mt19937_64 rng(13);
  const auto x = random_volume<double>({2, 2, 2, 2, 5}, rng, -20.0, 20.0);
  const auto p = softmax_channels(x);
  for (std::size_t v = 0; v < p.size() / 5; ++v) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) s += p[v * 5 + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Activations, GeluOfOneMatchesIntegratedNormalCdf) {
  // Phi(1) = 1/2 + integral_0^1 of the standard normal density (composite Simpson).
  const int n = 2000;
  const double h = 1.0 / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = i * h;
    const double f = std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
    s += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  const double phi1 = 0.5 + s * h / 3.0;
  EXPECT_NEAR(gelu_scalar(1.0), phi1, 1e-6);
  EXPECT_NEAR(gelu_scalar(1.0), 0.8413447460685429, 1e-6);
}

TEST(Activations, GeluBackwardMatchesFiniteDifference) {
  std::mt19937_64 rng(14);
  const auto x = random_volume<double>({1, 2, 2, 2, 2}, rng, -3.0, 3.0);
  Volume<double> ones(x.shape(), 1.0);
  const auto g = gelu_backward(x, ones);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-6;
    const double fd = (gelu_scalar(x[i] + h) - gelu_scalar(x[i] - h)) / (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-8);
  }
}
