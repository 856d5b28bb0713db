#include "amber/mhsa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace amber {

namespace {

// out (n, m) = a (n, k) * b (k, m) + bias (m)
template <typename T>
void matmul_bias(const T* a, const T* b, const T* bias, T* out, std::size_t n, std::size_t k,
                 std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    T* o = out + i * m;
    if (bias) {
      std::copy(bias, bias + m, o);
    } else {
      std::fill(o, o + m, T(0));
    }
    for (std::size_t t = 0; t < k; ++t) {
      const T av = a[i * k + t];
      const T* br = b + t * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
}

// Accumulates grads of out = a b + bias: ga += go b^T, gb += a^T go, gbias += sum go.
template <typename T>
void matmul_bias_backward(const T* a, const T* b, const T* go, T* ga, T* gb, T* gbias,
                          std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* g = go + i * m;
    for (std::size_t j = 0; j < m; ++j) gbias[j] += g[j];
    for (std::size_t t = 0; t < k; ++t) {
      const T* br = b + t * m;
      T* gbr = gb + t * m;
      const T av = a[i * k + t];
      T acc = 0;
      for (std::size_t j = 0; j < m; ++j) {
        acc += g[j] * br[j];
        gbr[j] += av * g[j];
      }
      ga[i * k + t] += acc;
    }
  }
}

}  // namespace

void MhsaConfig::validate() const {
  if (channels < 1) throw ConfigError("mhsa: channels must be >= 1");
  if (heads < 1 || channels % heads != 0) {
    throw ConfigError("mhsa: heads " + std::to_string(heads) + " must divide channels " +
                      std::to_string(channels));
  }
}

std::size_t mhsa_parameter_count(const MhsaConfig& config) {
  return 4 * config.channels * config.channels + 4 * config.channels;
}

template <typename T>
MhsaWeights<T> MhsaWeights<T>::zeros(const MhsaConfig& config) {
  const std::size_t c = config.channels;
  MhsaWeights<T> w;
  for (auto* m : {&w.wq, &w.wk, &w.wv, &w.wo}) m->assign(c * c, T(0));
  for (auto* v : {&w.bq, &w.bk, &w.bv, &w.bo}) v->assign(c, T(0));
  return w;
}

template <typename T>
void MhsaWeights<T>::check(const MhsaConfig& config) const {
  const std::size_t c = config.channels;
  for (const auto* m : {&wq, &wk, &wv, &wo})
    if (m->size() != c * c) throw ConfigError("mhsa: projection matrix size mismatch");
  for (const auto* v : {&bq, &bk, &bv, &bo})
    if (v->size() != c) throw ConfigError("mhsa: bias size mismatch");
}

template <typename T>
Volume<T> mhsa_forward(const Volume<T>& x, const MhsaConfig& config, const MhsaWeights<T>& weights,
                       MhsaCache<T>* cache) {
  config.validate();
  weights.check(config);
  const Shape5& s = x.shape();
  if (s.c != config.channels) {
    throw ConfigError("mhsa: input has " + std::to_string(s.c) + " channels, config expects " +
                      std::to_string(config.channels));
  }
  const std::size_t L = s.voxels();
  if (L > config.max_tokens) {
    throw ConfigError("mhsa: sequence length " + std::to_string(L) + " exceeds token cap " +
                      std::to_string(config.max_tokens));
  }
  const std::size_t C = s.c, nh = config.heads, dh = config.head_dim();
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  std::vector<T> q(s.b * L * C), k(q.size()), v(q.size()), ctx(q.size());
  std::vector<T> attn(s.b * nh * L * L);
  Volume<T> y(s);
  std::vector<T> row(L);
  for (std::size_t b = 0; b < s.b; ++b) {
    const T* xb = x.data().data() + b * L * C;
    T* qb = q.data() + b * L * C;
    T* kb = k.data() + b * L * C;
    T* vb = v.data() + b * L * C;
    T* cb = ctx.data() + b * L * C;
    matmul_bias(xb, weights.wq.data(), weights.bq.data(), qb, L, C, C);
    matmul_bias(xb, weights.wk.data(), weights.bk.data(), kb, L, C, C);
    matmul_bias(xb, weights.wv.data(), weights.bv.data(), vb, L, C, C);
    for (std::size_t h = 0; h < nh; ++h) {
      T* a = attn.data() + (b * nh + h) * L * L;
      for (std::size_t i = 0; i < L; ++i) {
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < L; ++j) {
          T dot = 0;
          for (std::size_t t = 0; t < dh; ++t) dot += qb[i * C + h * dh + t] * kb[j * C + h * dh + t];
          row[j] = dot * inv_sqrt;
          mx = std::max(mx, row[j]);
        }
        double sum = 0;
        for (std::size_t j = 0; j < L; ++j) sum += std::exp(static_cast<double>(row[j] - mx));
        for (std::size_t j = 0; j < L; ++j)
          a[i * L + j] = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / sum);
        T* ci = cb + i * C + h * dh;
        std::fill(ci, ci + dh, T(0));
        for (std::size_t j = 0; j < L; ++j) {
          const T w = a[i * L + j];
          const T* vj = vb + j * C + h * dh;
          for (std::size_t t = 0; t < dh; ++t) ci[t] += w * vj[t];
        }
      }
    }
    matmul_bias(cb, weights.wo.data(), weights.bo.data(), y.data().data() + b * L * C, L, C, C);
  }
  if (cache) {
    cache->shape = s;
    cache->x = x.storage();
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
    cache->context = std::move(ctx);
  }
  return y;
}

template <typename T>
MhsaGrads<T> mhsa_backward(const MhsaCache<T>& cache, const MhsaConfig& config,
                           const MhsaWeights<T>& weights, const Volume<T>& grad_out) {
  const Shape5& s = cache.shape;
  const std::size_t L = s.voxels(), C = s.c, nh = config.heads, dh = config.head_dim();
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  MhsaGrads<T> g{Volume<T>(s), MhsaWeights<T>::zeros(config)};
  std::vector<T> gq(L * C), gk(L * C), gv(L * C), gctx(L * C), ga(L);
  for (std::size_t b = 0; b < s.b; ++b) {
    const std::size_t off = b * L * C;
    std::fill(gq.begin(), gq.end(), T(0));
    std::fill(gk.begin(), gk.end(), T(0));
    std::fill(gv.begin(), gv.end(), T(0));
    std::fill(gctx.begin(), gctx.end(), T(0));
    matmul_bias_backward(cache.context.data() + off, weights.wo.data(),
                         grad_out.data().data() + off, gctx.data(), g.weights.wo.data(),
                         g.weights.bo.data(), L, C, C);
    const T* qb = cache.q.data() + off;
    const T* kb = cache.k.data() + off;
    const T* vb = cache.v.data() + off;
    for (std::size_t h = 0; h < nh; ++h) {
      const T* a = cache.attn.data() + (b * nh + h) * L * L;
      for (std::size_t i = 0; i < L; ++i) {
        const T* gci = gctx.data() + i * C + h * dh;
        double dot = 0;
        for (std::size_t j = 0; j < L; ++j) {
          const T* vj = vb + j * C + h * dh;
          T acc = 0;
          for (std::size_t t = 0; t < dh; ++t) acc += gci[t] * vj[t];
          ga[j] = acc;
          dot += static_cast<double>(acc) * a[i * L + j];
          T* gvj = gv.data() + j * C + h * dh;
          const T w = a[i * L + j];
          for (std::size_t t = 0; t < dh; ++t) gvj[t] += w * gci[t];
        }
        for (std::size_t j = 0; j < L; ++j) {
          const T gs = static_cast<T>(a[i * L + j] * (ga[j] - dot)) * inv_sqrt;
          if (gs == T(0)) continue;
          const T* kj = kb + j * C + h * dh;
          const T* qi = qb + i * C + h * dh;
          T* gqi = gq.data() + i * C + h * dh;
          T* gkj = gk.data() + j * C + h * dh;
          for (std::size_t t = 0; t < dh; ++t) {
            gqi[t] += gs * kj[t];
            gkj[t] += gs * qi[t];
          }
        }
      }
    }
    const T* xb = cache.x.data() + off;
    T* gx = g.input.data().data() + off;
    matmul_bias_backward(xb, weights.wq.data(), gq.data(), gx, g.weights.wq.data(),
                         g.weights.bq.data(), L, C, C);
    matmul_bias_backward(xb, weights.wk.data(), gk.data(), gx, g.weights.wk.data(),
                         g.weights.bk.data(), L, C, C);
    matmul_bias_backward(xb, weights.wv.data(), gv.data(), gx, g.weights.wv.data(),
                         g.weights.bv.data(), L, C, C);
  }
  return g;
}

template struct MhsaWeights<float>;
template struct MhsaWeights<double>;
template Volume<float> mhsa_forward<float>(const Volume<float>&, const MhsaConfig&,
                                           const MhsaWeights<float>&, MhsaCache<float>*);
template Volume<double> mhsa_forward<double>(const Volume<double>&, const MhsaConfig&,
                                             const MhsaWeights<double>&, MhsaCache<double>*);
template MhsaGrads<float> mhsa_backward<float>(const MhsaCache<float>&, const MhsaConfig&,
                                               const MhsaWeights<float>&, const Volume<float>&);
template MhsaGrads<double> mhsa_backward<double>(const MhsaCache<double>&, const MhsaConfig&,
                                                 const MhsaWeights<double>&,
                                                 const Volume<double>&);

}  // namespace amber
