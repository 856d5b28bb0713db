#include <gtest/gtest.h>

#include "amber/mhsa.hpp"
#include "test_support.hpp"

using namespace amber;
using namespace amber::testing;

namespace {

MhsaConfig make_config(std::size_t c, std::size_t heads) {
  MhsaConfig cfg;
  cfg.channels = c;
  cfg.heads = heads;
  return cfg;
}

MhsaWeights<double> random_weights(const MhsaConfig& cfg, std::mt19937_64& rng) {
  auto w = MhsaWeights<double>::zeros(cfg);
  for (auto* v : {&w.wq, &w.bq, &w.wk, &w.bk, &w.wv, &w.bv, &w.wo, &w.bo}) {
    *v = random_vector<double>(v->size(), rng);
  }
  return w;
}

// y = x W + b for one row vector.
std::vector<double> affine(const double* x, const std::vector<double>& w,
                           const std::vector<double>& b, std::size_t c) {
  std::vector<double> y(b);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j] += x[i] * w[i * c + j];
  return y;
}

}  // namespace

TEST(Mhsa, SingleTokenReturnsProjectedValue) {
  std::mt19937_64 rng(51);
  const auto cfg = make_config(4, 2);
  const auto w = random_weights(cfg, rng);
  const auto x = random_volume<double>({1, 1, 1, 1, 4}, rng);
  MhsaCache<double> cache;
  const auto y = mhsa_forward(x, cfg, w, &cache);
  for (double a : cache.attn) EXPECT_DOUBLE_EQ(a, 1.0);
  const auto v = affine(x.data().data(), w.wv, w.bv, 4);
  const auto o = affine(v.data(), w.wo, w.bo, 4);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(y[c], o[c], 1e-14);
}

TEST(Mhsa, IdenticalTokensGiveIdenticalOutputs) {
  std::mt19937_64 rng(52);
  const auto cfg = make_config(6, 3);
  const auto w = random_weights(cfg, rng);
  const auto token = random_vector<double>(6, rng);
  Volume<double> x(Shape5{1, 2, 3, 2, 6});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = token[i % 6];
  const auto y = mhsa_forward(x, cfg, w);
  for (std::size_t i = 6; i < y.size(); ++i) EXPECT_NEAR(y[i], y[i % 6], 1e-13);
}

TEST(Mhsa, MatchesScalarReference) {
  std::mt19937_64 rng(53);
  const std::size_t c = 4, heads = 2, dh = 2, L = 4;
  const auto cfg = make_config(c, heads);
  const auto w = random_weights(cfg, rng);
  const auto x = random_volume<double>({1, 1, 2, 2, c}, rng);
  const auto y = mhsa_forward(x, cfg, w);

  std::vector<std::vector<double>> q(L), k(L), v(L);
  for (std::size_t t = 0; t < L; ++t) {
    q[t] = affine(&x[t * c], w.wq, w.bq, c);
    k[t] = affine(&x[t * c], w.wk, w.bk, c);
    v[t] = affine(&x[t * c], w.wv, w.bv, c);
  }
  double worst = 0.0;
  for (std::size_t t = 0; t < L; ++t) {
    std::vector<double> ctx(c, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      std::vector<double> score(L);
      double peak = -INFINITY;
      for (std::size_t s = 0; s < L; ++s) {
        double dotp = 0.0;
        for (std::size_t j = 0; j < dh; ++j) dotp += q[t][h * dh + j] * k[s][h * dh + j];
        score[s] = dotp / std::sqrt(double(dh));
        peak = std::max(peak, score[s]);
      }
      double z = 0.0;
      for (double& sc : score) z += (sc = std::exp(sc - peak));
      for (std::size_t s = 0; s < L; ++s)
        for (std::size_t j = 0; j < dh; ++j) ctx[h * dh + j] += score[s] / z * v[s][h * dh + j];
    }
    const auto o = affine(ctx.data(), w.wo, w.bo, c);
    for (std::size_t j = 0; j < c; ++j) worst = std::max(worst, std::abs(o[j] - y[t * c + j]));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Mhsa, AttentionRowsSumToOne) {
  std::mt19937_64 rng(54);
  const auto cfg = make_config(8, 4);
  const auto w = random_weights(cfg, rng);
  const auto x = random_volume<double>({2, 2, 2, 2, 8}, rng, -3.0, 3.0);
  MhsaCache<double> cache;
  mhsa_forward(x, cfg, w, &cache);
  const std::size_t L = 8;
  ASSERT_EQ(cache.attn.size(), 2 * 4 * L * L);
  for (std::size_t row = 0; row < cache.attn.size() / L; ++row) {
    double s = 0.0;
    for (std::size_t j = 0; j < L; ++j) s += cache.attn[row * L + j];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Mhsa, RejectsTooManyTokensAndIndivisibleHeads) {
  auto cfg = make_config(4, 2);
  cfg.max_tokens = 7;
  const auto w = MhsaWeights<double>::zeros(cfg);
  Volume<double> x(Shape5{1, 2, 2, 2, 4});
  EXPECT_THROW(mhsa_forward(x, cfg, w), ConfigError);
  EXPECT_THROW(make_config(6, 4).validate(), ConfigError);
}

TEST(Mhsa, ParameterCount) {
  EXPECT_EQ(mhsa_parameter_count(make_config(64, 8)), 16640u);
  for (std::size_t c : {4, 16, 256}) {
    const auto cfg = make_config(c, 4);
    const auto w = MhsaWeights<double>::zeros(cfg);
    std::size_t stored = 0;
    for (const auto* v : {&w.wq, &w.bq, &w.wk, &w.bk, &w.wv, &w.bv, &w.wo, &w.bo}) stored += v->size();
    EXPECT_EQ(mhsa_parameter_count(cfg), stored);
    EXPECT_EQ(stored, 4 * c * c + 4 * c);
  }
}

TEST(Mhsa, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(55);
  const auto cfg = make_config(4, 2);
  auto w = random_weights(cfg, rng);
  const auto x = random_volume<double>({1, 2, 1, 2, 4}, rng);
  const auto gy = random_volume<double>({1, 2, 1, 2, 4}, rng);
  auto loss = [&](const Volume<double>& in, const MhsaWeights<double>& ww) {
    return dot<double>(mhsa_forward(in, cfg, ww).data(), gy.data());
  };
  MhsaCache<double> cache;
  mhsa_forward(x, cfg, w, &cache);
  const auto grads = mhsa_backward(cache, cfg, w, gy);
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    EXPECT_NEAR(grads.input[i], (loss(xp, w) - loss(xm, w)) / (2 * h), 1e-7);
  }
  auto check = [&](std::vector<double> MhsaWeights<double>::*field) {
    const auto& g = grads.weights.*field;
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto wp = w, wm = w;
      (wp.*field)[i] += h;
      (wm.*field)[i] -= h;
      EXPECT_NEAR(g[i], (loss(x, wp) - loss(x, wm)) / (2 * h), 1e-7);
    }
  };
  for (auto field : {&MhsaWeights<double>::wq, &MhsaWeights<double>::bq, &MhsaWeights<double>::wk,
                     &MhsaWeights<double>::bk, &MhsaWeights<double>::wv, &MhsaWeights<double>::bv,
                     &MhsaWeights<double>::wo, &MhsaWeights<double>::bo}) {
    check(field);
  }
}
