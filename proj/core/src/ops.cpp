#include "amber/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace amber {

namespace {

const char* kAxisNames[3] = {"depth", "height", "width"};

std::size_t extent_at(const Extent3& e, int axis) {
  return axis == 0 ? e.d : axis == 1 ? e.h : e.w;
}

void check_input(const Shape5& s, const ConvSpec& spec, const char* op) {
  if (s.c != spec.in_channels) {
    throw ConfigError(std::string(op) + ": channel axis has " + std::to_string(s.c) +
                      " channels, conv expects " + std::to_string(spec.in_channels));
  }
}


template <typename T>
void check_weight_shape(const Tensor<T>& w, const std::vector<std::size_t>& expected,
                        const char* op) {
  if (w.shape() != expected) {
    throw ConfigError(std::string(op) + ": weight shape " + shape_string(w.shape()) +
                      " does not match expected " + shape_string(expected));
  }
}

template <typename T>
void check_bias(std::span<const T> bias, std::size_t n, const char* op) {
  if (!bias.empty() && bias.size() != n) {
    throw ConfigError(std::string(op) + ": bias length " + std::to_string(bias.size()) +
                      " != " + std::to_string(n));
  }
}

struct AxisSample {
  std::size_t i0;
  std::size_t i1;
  double frac;
};

std::vector<AxisSample> trilinear_axis(std::size_t in, std::size_t out) {
  std::vector<AxisSample> s(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    auto i0 = static_cast<std::size_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    s[i] = {i0, i1, src - static_cast<double>(i0)};
  }
  return s;
}

}  // namespace

Extent3 ConvSpec::output_extent(const Extent3& in) const {
  std::size_t out[3];
  for (int a = 0; a < 3; ++a) {
    const long n = static_cast<long>(extent_at(in, a));
    const long num = n + 2 * static_cast<long>(padding) - static_cast<long>(kernel[a]);
    if (num < 0) {
      throw ConfigError("conv3d: " + std::string(kAxisNames[a]) + " extent " + std::to_string(n) +
                        " too small for kernel " + std::to_string(kernel[a]) + " with padding " +
                        std::to_string(padding));
    }
    out[a] = static_cast<std::size_t>(num) / stride + 1;
  }
  return {out[0], out[1], out[2]};
}

Extent3 ConvSpec::transposed_output_extent(const Extent3& in) const {
  std::size_t out[3];
  for (int a = 0; a < 3; ++a) {
    const long n = static_cast<long>(extent_at(in, a));
    const long v = (n - 1) * static_cast<long>(stride) - 2 * static_cast<long>(padding) +
                   static_cast<long>(kernel[a]);
    if (n < 1 || v < 1) {
      throw ConfigError("conv3d_transposed: non-positive " + std::string(kAxisNames[a]) +
                        " output extent " + std::to_string(v));
    }
    out[a] = static_cast<std::size_t>(v);
  }
  return {out[0], out[1], out[2]};
}

void ConvSpec::validate() const {
  if (stride < 1) throw ConfigError("conv spec: stride must be >= 1");
  for (int a = 0; a < 3; ++a) {
    if (kernel[a] < 1) {
      throw ConfigError("conv spec: " + std::string(kAxisNames[a]) + " kernel must be >= 1");
    }
  }
  if (groups < 1 || in_channels % groups != 0 || out_channels % groups != 0) {
    throw ConfigError("conv spec: groups " + std::to_string(groups) + " must divide in (" +
                      std::to_string(in_channels) + ") and out (" + std::to_string(out_channels) +
                      ") channels");
  }
  if (in_channels < 1 || out_channels < 1) throw ConfigError("conv spec: zero channels");
}

std::vector<std::size_t> conv_weight_shape(const ConvSpec& spec) {
  return {spec.kernel[0], spec.kernel[1], spec.kernel[2], spec.in_channels / spec.groups,
          spec.out_channels};
}

std::vector<std::size_t> conv_transposed_weight_shape(const ConvSpec& spec) {
  return {spec.kernel[0], spec.kernel[1], spec.kernel[2], spec.out_channels, spec.in_channels};
}

template <typename T>
Volume<T> conv3d(const Volume<T>& x, const Tensor<T>& weight, std::span<const T> bias,
                 const ConvSpec& spec) {
  spec.validate();
  const Shape5& s = x.shape();
  check_input(s, spec, "conv3d");
  check_weight_shape(weight, conv_weight_shape(spec), "conv3d");
  check_bias(bias, spec.out_channels, "conv3d");
  const Extent3 oe = spec.output_extent(spatial(s));
  const Shape5 os{s.b, oe.d, oe.h, oe.w, spec.out_channels};
  Volume<T> y(os);

  const std::size_t cin_g = spec.in_channels / spec.groups;
  const std::size_t cout_g = spec.out_channels / spec.groups;
  const std::size_t cout = spec.out_channels;
  const std::size_t kd_n = spec.kernel[0], kh_n = spec.kernel[1], kw_n = spec.kernel[2];
  const bool depthwise = cin_g == 1 && cout_g == 1;
  const long pad = static_cast<long>(spec.padding);
  const long st = static_cast<long>(spec.stride);
  const T* wdata = weight.data().data();
  const T* xdata = x.data().data();

  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t od = 0; od < oe.d; ++od)
      for (std::size_t oh = 0; oh < oe.h; ++oh)
        for (std::size_t ow = 0; ow < oe.w; ++ow) {
          T* yp = &y.at(b, od, oh, ow, 0);
          if (!bias.empty()) std::copy(bias.begin(), bias.end(), yp);
          for (std::size_t kd = 0; kd < kd_n; ++kd) {
            const long id = static_cast<long>(od) * st - pad + static_cast<long>(kd);
            if (id < 0 || id >= static_cast<long>(s.d)) continue;
            for (std::size_t kh = 0; kh < kh_n; ++kh) {
              const long ih = static_cast<long>(oh) * st - pad + static_cast<long>(kh);
              if (ih < 0 || ih >= static_cast<long>(s.h)) continue;
              for (std::size_t kw = 0; kw < kw_n; ++kw) {
                const long iw = static_cast<long>(ow) * st - pad + static_cast<long>(kw);
                if (iw < 0 || iw >= static_cast<long>(s.w)) continue;
                const T* xp = xdata + x.index(b, id, ih, iw, 0);
                const T* wk = wdata + ((kd * kh_n + kh) * kw_n + kw) * cin_g * cout;
                if (depthwise) {
                  for (std::size_t c = 0; c < cout; ++c) yp[c] += xp[c] * wk[c];
                  continue;
                }
                for (std::size_t g = 0; g < spec.groups; ++g) {
                  for (std::size_t ci = 0; ci < cin_g; ++ci) {
                    const T xv = xp[g * cin_g + ci];
                    const T* wr = wk + ci * cout + g * cout_g;
                    T* yg = yp + g * cout_g;
                    for (std::size_t co = 0; co < cout_g; ++co) yg[co] += xv * wr[co];
                  }
                }
              }
            }
          }
        }
  return y;
}

template <typename T>
ConvGrads<T> conv3d_backward(const Volume<T>& x, const Tensor<T>& weight, const ConvSpec& spec,
                             const Volume<T>& grad_out) {
  spec.validate();
  const Shape5& s = x.shape();
  check_input(s, spec, "conv3d_backward");
  const Extent3 oe = spec.output_extent(spatial(s));
  const Shape5 os{s.b, oe.d, oe.h, oe.w, spec.out_channels};
  if (!(grad_out.shape() == os)) {
    throw ConfigError("conv3d_backward: grad shape " + grad_out.shape().str() + " != " + os.str());
  }
  ConvGrads<T> g{Volume<T>(s), Tensor<T>(weight.shape()), std::vector<T>(spec.out_channels)};

  const std::size_t cin_g = spec.in_channels / spec.groups;
  const std::size_t cout_g = spec.out_channels / spec.groups;
  const std::size_t cout = spec.out_channels;
  const std::size_t kd_n = spec.kernel[0], kh_n = spec.kernel[1], kw_n = spec.kernel[2];
  const bool depthwise = cin_g == 1 && cout_g == 1;
  const long pad = static_cast<long>(spec.padding);
  const long st = static_cast<long>(spec.stride);
  const T* wdata = weight.data().data();
  T* gwdata = g.weight.data().data();
  const T* xdata = x.data().data();
  T* gxdata = g.input.data().data();

  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t od = 0; od < oe.d; ++od)
      for (std::size_t oh = 0; oh < oe.h; ++oh)
        for (std::size_t ow = 0; ow < oe.w; ++ow) {
          const T* gy = &grad_out.at(b, od, oh, ow, 0);
          for (std::size_t c = 0; c < cout; ++c) g.bias[c] += gy[c];
          for (std::size_t kd = 0; kd < kd_n; ++kd) {
            const long id = static_cast<long>(od) * st - pad + static_cast<long>(kd);
            if (id < 0 || id >= static_cast<long>(s.d)) continue;
            for (std::size_t kh = 0; kh < kh_n; ++kh) {
              const long ih = static_cast<long>(oh) * st - pad + static_cast<long>(kh);
              if (ih < 0 || ih >= static_cast<long>(s.h)) continue;
              for (std::size_t kw = 0; kw < kw_n; ++kw) {
                const long iw = static_cast<long>(ow) * st - pad + static_cast<long>(kw);
                if (iw < 0 || iw >= static_cast<long>(s.w)) continue;
                const std::size_t xi = x.index(b, id, ih, iw, 0);
                const T* xp = xdata + xi;
                T* gxp = gxdata + xi;
                const std::size_t koff = ((kd * kh_n + kh) * kw_n + kw) * cin_g * cout;
                const T* wk = wdata + koff;
                T* gwk = gwdata + koff;
                if (depthwise) {
                  for (std::size_t c = 0; c < cout; ++c) {
                    gxp[c] += gy[c] * wk[c];
                    gwk[c] += gy[c] * xp[c];
                  }
                  continue;
                }
                for (std::size_t grp = 0; grp < spec.groups; ++grp) {
                  const T* gyg = gy + grp * cout_g;
                  for (std::size_t ci = 0; ci < cin_g; ++ci) {
                    const std::size_t cidx = grp * cin_g + ci;
                    const T xv = xp[cidx];
                    const T* wr = wk + ci * cout + grp * cout_g;
                    T* gwr = gwk + ci * cout + grp * cout_g;
                    T acc = 0;
                    for (std::size_t co = 0; co < cout_g; ++co) {
                      acc += gyg[co] * wr[co];
                      gwr[co] += gyg[co] * xv;
                    }
                    gxp[cidx] += acc;
                  }
                }
              }
            }
          }
        }
  return g;
}

template <typename T>
Volume<T> conv3d_transposed(const Volume<T>& x, const Tensor<T>& weight, std::span<const T> bias,
                            const ConvSpec& spec) {
  spec.validate();
  if (spec.groups != 1) throw ConfigError("conv3d_transposed: only groups = 1 is supported");
  const Shape5& s = x.shape();
  check_input(s, spec, "conv3d_transposed");
  check_weight_shape(weight, conv_transposed_weight_shape(spec), "conv3d_transposed");
  check_bias(bias, spec.out_channels, "conv3d_transposed");
  const Extent3 oe = spec.transposed_output_extent(spatial(s));
  const Shape5 os{s.b, oe.d, oe.h, oe.w, spec.out_channels};
  Volume<T> y(os);
  if (!bias.empty()) {
    for (std::size_t p = 0; p < os.b * os.voxels(); ++p)
      std::copy(bias.begin(), bias.end(), y.data().data() + p * os.c);
  }
  const std::size_t cin = spec.in_channels, cout = spec.out_channels;
  const std::size_t kd_n = spec.kernel[0], kh_n = spec.kernel[1], kw_n = spec.kernel[2];
  const long pad = static_cast<long>(spec.padding);
  const long st = static_cast<long>(spec.stride);
  const T* wdata = weight.data().data();

  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t id = 0; id < s.d; ++id)
      for (std::size_t ih = 0; ih < s.h; ++ih)
        for (std::size_t iw = 0; iw < s.w; ++iw) {
          const T* xp = &x.at(b, id, ih, iw, 0);
          for (std::size_t kd = 0; kd < kd_n; ++kd) {
            const long od = static_cast<long>(id) * st - pad + static_cast<long>(kd);
            if (od < 0 || od >= static_cast<long>(oe.d)) continue;
            for (std::size_t kh = 0; kh < kh_n; ++kh) {
              const long oh = static_cast<long>(ih) * st - pad + static_cast<long>(kh);
              if (oh < 0 || oh >= static_cast<long>(oe.h)) continue;
              for (std::size_t kw = 0; kw < kw_n; ++kw) {
                const long ow = static_cast<long>(iw) * st - pad + static_cast<long>(kw);
                if (ow < 0 || ow >= static_cast<long>(oe.w)) continue;
                T* yp = &y.at(b, od, oh, ow, 0);
                const T* wk = wdata + ((kd * kh_n + kh) * kw_n + kw) * cout * cin;
                for (std::size_t a = 0; a < cout; ++a) {
                  const T* wr = wk + a * cin;
                  T acc = 0;
                  for (std::size_t c = 0; c < cin; ++c) acc += xp[c] * wr[c];
                  yp[a] += acc;
                }
              }
            }
          }
        }
  return y;
}

template <typename T>
ConvGrads<T> conv3d_transposed_backward(const Volume<T>& x, const Tensor<T>& weight,
                                        const ConvSpec& spec, const Volume<T>& grad_out) {
  spec.validate();
  const Shape5& s = x.shape();
  check_input(s, spec, "conv3d_transposed_backward");
  const Extent3 oe = spec.transposed_output_extent(spatial(s));
  const Shape5 os{s.b, oe.d, oe.h, oe.w, spec.out_channels};
  if (!(grad_out.shape() == os)) {
    throw ConfigError("conv3d_transposed_backward: grad shape " + grad_out.shape().str() +
                      " != " + os.str());
  }
  ConvGrads<T> g{Volume<T>(s), Tensor<T>(weight.shape()), std::vector<T>(spec.out_channels)};
  for (std::size_t p = 0; p < os.b * os.voxels(); ++p)
    for (std::size_t a = 0; a < os.c; ++a) g.bias[a] += grad_out.data()[p * os.c + a];

  const std::size_t cin = spec.in_channels, cout = spec.out_channels;
  const std::size_t kd_n = spec.kernel[0], kh_n = spec.kernel[1], kw_n = spec.kernel[2];
  const long pad = static_cast<long>(spec.padding);
  const long st = static_cast<long>(spec.stride);
  const T* wdata = weight.data().data();
  T* gwdata = g.weight.data().data();

  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t id = 0; id < s.d; ++id)
      for (std::size_t ih = 0; ih < s.h; ++ih)
        for (std::size_t iw = 0; iw < s.w; ++iw) {
          const T* xp = &x.at(b, id, ih, iw, 0);
          T* gxp = &g.input.at(b, id, ih, iw, 0);
          for (std::size_t kd = 0; kd < kd_n; ++kd) {
            const long od = static_cast<long>(id) * st - pad + static_cast<long>(kd);
            if (od < 0 || od >= static_cast<long>(oe.d)) continue;
            for (std::size_t kh = 0; kh < kh_n; ++kh) {
              const long oh = static_cast<long>(ih) * st - pad + static_cast<long>(kh);
              if (oh < 0 || oh >= static_cast<long>(oe.h)) continue;
              for (std::size_t kw = 0; kw < kw_n; ++kw) {
                const long ow = static_cast<long>(iw) * st - pad + static_cast<long>(kw);
                if (ow < 0 || ow >= static_cast<long>(oe.w)) continue;
                const T* gy = &grad_out.at(b, od, oh, ow, 0);
                const std::size_t koff = ((kd * kh_n + kh) * kw_n + kw) * cout * cin;
                const T* wk = wdata + koff;
                T* gwk = gwdata + koff;
                for (std::size_t a = 0; a < cout; ++a) {
                  const T ga = gy[a];
                  const T* wr = wk + a * cin;
                  T* gwr = gwk + a * cin;
                  for (std::size_t c = 0; c < cin; ++c) {
                    gxp[c] += ga * wr[c];
                    gwr[c] += ga * xp[c];
                  }
                }
              }
            }
          }
        }
  return g;
}

template <typename T>
Volume<T> upsample_trilinear(const Volume<T>& x, const Extent3& target) {
  const Shape5& s = x.shape();
  if (target.d < s.d || target.h < s.h || target.w < s.w) {
    throw ConfigError("upsample_trilinear: target " + target.str() + " smaller than source " +
                      spatial(s).str());
  }
  if (target == spatial(s)) return x;
  const auto ad = trilinear_axis(s.d, target.d);
  const auto ah = trilinear_axis(s.h, target.h);
  const auto aw = trilinear_axis(s.w, target.w);
  Volume<T> y(Shape5{s.b, target.d, target.h, target.w, s.c});
  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t d = 0; d < target.d; ++d)
      for (std::size_t h = 0; h < target.h; ++h)
        for (std::size_t w = 0; w < target.w; ++w) {
          T* yp = &y.at(b, d, h, w, 0);
          const std::size_t zi[2] = {ad[d].i0, ad[d].i1};
          const std::size_t yi[2] = {ah[h].i0, ah[h].i1};
          const std::size_t xi[2] = {aw[w].i0, aw[w].i1};
          const T zf[2] = {T(1 - ad[d].frac), T(ad[d].frac)};
          const T yf[2] = {T(1 - ah[h].frac), T(ah[h].frac)};
          const T xf[2] = {T(1 - aw[w].frac), T(aw[w].frac)};
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
              for (int k = 0; k < 2; ++k) {
                const T wgt = zf[i] * yf[j] * xf[k];
                if (wgt == T(0)) continue;
                const T* xp = &x.at(b, zi[i], yi[j], xi[k], 0);
                for (std::size_t c = 0; c < s.c; ++c) yp[c] += wgt * xp[c];
              }
        }
  return y;
}

template <typename T>
Volume<T> upsample_trilinear_backward(const Volume<T>& grad_out, const Shape5& input_shape) {
  const Shape5& gs = grad_out.shape();
  const Extent3 target = spatial(gs);
  if (target == spatial(input_shape)) return grad_out;
  const auto ad = trilinear_axis(input_shape.d, target.d);
  const auto ah = trilinear_axis(input_shape.h, target.h);
  const auto aw = trilinear_axis(input_shape.w, target.w);
  Volume<T> gx(input_shape);
  for (std::size_t b = 0; b < gs.b; ++b)
    for (std::size_t d = 0; d < target.d; ++d)
      for (std::size_t h = 0; h < target.h; ++h)
        for (std::size_t w = 0; w < target.w; ++w) {
          const T* gp = &grad_out.at(b, d, h, w, 0);
          const std::size_t zi[2] = {ad[d].i0, ad[d].i1};
          const std::size_t yi[2] = {ah[h].i0, ah[h].i1};
          const std::size_t xi[2] = {aw[w].i0, aw[w].i1};
          const T zf[2] = {T(1 - ad[d].frac), T(ad[d].frac)};
          const T yf[2] = {T(1 - ah[h].frac), T(ah[h].frac)};
          const T xf[2] = {T(1 - aw[w].frac), T(aw[w].frac)};
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
              for (int k = 0; k < 2; ++k) {
                const T wgt = zf[i] * yf[j] * xf[k];
                if (wgt == T(0)) continue;
                T* xp = &gx.at(b, zi[i], yi[j], xi[k], 0);
                for (std::size_t c = 0; c < gs.c; ++c) xp[c] += wgt * gp[c];
              }
        }
  return gx;
}

template <typename T>
Volume<T> layer_norm(const Volume<T>& x, std::span<const T> gamma, std::span<const T> beta, T eps,
                     NormCache<T>* cache) {
  const Shape5& s = x.shape();
  if (gamma.size() != s.c || beta.size() != s.c) {
    throw ConfigError("layer_norm: gamma/beta length must equal channel count " +
                      std::to_string(s.c));
  }
  const std::size_t positions = s.b * s.voxels();
  Volume<T> y(s);
  if (cache) {
    cache->normalized = Volume<T>(s);
    cache->inv_std.assign(positions, T(0));
  }
  for (std::size_t p = 0; p < positions; ++p) {
    const T* xp = x.data().data() + p * s.c;
    T* yp = y.data().data() + p * s.c;
    double mean = 0;
    for (std::size_t c = 0; c < s.c; ++c) mean += xp[c];
    mean /= static_cast<double>(s.c);
    double var = 0;
    for (std::size_t c = 0; c < s.c; ++c) {
      const double dv = xp[c] - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(s.c);
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    for (std::size_t c = 0; c < s.c; ++c) {
      const T xh = static_cast<T>((xp[c] - mean) * inv);
      yp[c] = gamma[c] * xh + beta[c];
      if (cache) cache->normalized.data()[p * s.c + c] = xh;
    }
    if (cache) cache->inv_std[p] = static_cast<T>(inv);
  }
  return y;
}

template <typename T>
NormGrads<T> layer_norm_backward(const NormCache<T>& cache, std::span<const T> gamma,
                                 const Volume<T>& grad_out) {
  const Shape5& s = grad_out.shape();
  const std::size_t positions = s.b * s.voxels();
  NormGrads<T> g{Volume<T>(s), std::vector<T>(s.c), std::vector<T>(s.c)};
  const double inv_c = 1.0 / static_cast<double>(s.c);
  std::vector<double> gxh(s.c);
  for (std::size_t p = 0; p < positions; ++p) {
    const T* gy = grad_out.data().data() + p * s.c;
    const T* xh = cache.normalized.data().data() + p * s.c;
    double m1 = 0, m2 = 0;
    for (std::size_t c = 0; c < s.c; ++c) {
      g.gamma[c] += gy[c] * xh[c];
      g.beta[c] += gy[c];
      gxh[c] = static_cast<double>(gy[c]) * gamma[c];
      m1 += gxh[c];
      m2 += gxh[c] * xh[c];
    }
    m1 *= inv_c;
    m2 *= inv_c;
    const double inv = cache.inv_std[p];
    T* gx = g.input.data().data() + p * s.c;
    for (std::size_t c = 0; c < s.c; ++c) gx[c] = static_cast<T>(inv * (gxh[c] - m1 - xh[c] * m2));
  }
  return g;
}

template <typename T>
Volume<T> batch_norm3d(const Volume<T>& x, std::span<const T> gamma, std::span<const T> beta,
                       BatchNormStats<T>& running, T eps, bool training, NormCache<T>* cache) {
  const Shape5& s = x.shape();
  if (gamma.size() != s.c || beta.size() != s.c || running.mean.size() != s.c ||
      running.var.size() != s.c) {
    throw ConfigError("batch_norm3d: parameter lengths must equal channel count " +
                      std::to_string(s.c));
  }
  const std::size_t n = s.b * s.voxels();
  std::vector<double> mean(s.c, 0.0), var(s.c, 0.0);
  if (training) {
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t c = 0; c < s.c; ++c) mean[c] += x.data()[p * s.c + c];
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t c = 0; c < s.c; ++c) {
        const double dv = x.data()[p * s.c + c] - mean[c];
        var[c] += dv * dv;
      }
    for (std::size_t c = 0; c < s.c; ++c) {
      const double biased = var[c] / static_cast<double>(n);
      const double unbiased = n > 1 ? var[c] / static_cast<double>(n - 1) : biased;
      running.mean[c] = static_cast<T>((1 - running.momentum) * running.mean[c] +
                                       running.momentum * mean[c]);
      running.var[c] =
          static_cast<T>((1 - running.momentum) * running.var[c] + running.momentum * unbiased);
      var[c] = biased;
    }
  } else {
    for (std::size_t c = 0; c < s.c; ++c) {
      mean[c] = running.mean[c];
      var[c] = running.var[c];
    }
  }
  std::vector<double> inv(s.c);
  for (std::size_t c = 0; c < s.c; ++c) inv[c] = 1.0 / std::sqrt(var[c] + static_cast<double>(eps));
  Volume<T> y(s);
  if (cache) {
    cache->normalized = Volume<T>(s);
    cache->inv_std.assign(inv.begin(), inv.end());
  }
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t i = p * s.c + c;
      const T xh = static_cast<T>((x.data()[i] - mean[c]) * inv[c]);
      y.data()[i] = gamma[c] * xh + beta[c];
      if (cache) cache->normalized.data()[i] = xh;
    }
  return y;
}

template <typename T>
NormGrads<T> batch_norm3d_backward(const NormCache<T>& cache, std::span<const T> gamma,
                                   const Volume<T>& grad_out, bool training) {
  const Shape5& s = grad_out.shape();
  const std::size_t n = s.b * s.voxels();
  NormGrads<T> g{Volume<T>(s), std::vector<T>(s.c), std::vector<T>(s.c)};
  std::vector<double> sum_g(s.c, 0.0), sum_gx(s.c, 0.0);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t i = p * s.c + c;
      sum_g[c] += grad_out.data()[i];
      sum_gx[c] += static_cast<double>(grad_out.data()[i]) * cache.normalized.data()[i];
    }
  for (std::size_t c = 0; c < s.c; ++c) {
    g.beta[c] = static_cast<T>(sum_g[c]);
    g.gamma[c] = static_cast<T>(sum_gx[c]);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t i = p * s.c + c;
      const double scale = static_cast<double>(gamma[c]) * cache.inv_std[c];
      if (training) {
        g.input.data()[i] = static_cast<T>(
            scale * (grad_out.data()[i] - sum_g[c] * inv_n -
                     cache.normalized.data()[i] * sum_gx[c] * inv_n));
      } else {
        g.input.data()[i] = static_cast<T>(scale * grad_out.data()[i]);
      }
    }
  return g;
}

template <typename T>
T gelu_scalar(T x) {
  return static_cast<T>(0.5 * x * (1.0 + std::erf(static_cast<double>(x) / std::sqrt(2.0))));
}

template <typename T>
Volume<T> gelu(const Volume<T>& x) {
  Volume<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = gelu_scalar(x[i]);
  return y;
}

template <typename T>
Volume<T> gelu_backward(const Volume<T>& x, const Volume<T>& grad_out) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  Volume<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    g[i] = static_cast<T>(grad_out[i] * (cdf + v * pdf));
  }
  return g;
}

template <typename T>
Volume<T> relu(const Volume<T>& x) {
  Volume<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Volume<T> relu_backward(const Volume<T>& y, const Volume<T>& grad_out) {
  Volume<T> g(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = y[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

template <typename T>
Volume<T> softmax_channels(const Volume<T>& logits) {
  const Shape5& s = logits.shape();
  Volume<T> p(s);
  const std::size_t positions = s.b * s.voxels();
  for (std::size_t q = 0; q < positions; ++q) {
    const T* z = logits.data().data() + q * s.c;
    T* out = p.data().data() + q * s.c;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < s.c; ++c) mx = std::max(mx, z[c]);
    double sum = 0;
    for (std::size_t c = 0; c < s.c; ++c) sum += std::exp(static_cast<double>(z[c] - mx));
    for (std::size_t c = 0; c < s.c; ++c)
      out[c] = static_cast<T>(std::exp(static_cast<double>(z[c] - mx)) / sum);
  }
  return p;
}

template <typename T>
Volume<T> softmax_channels_backward(const Volume<T>& probs, const Volume<T>& grad_out) {
  const Shape5& s = probs.shape();
  Volume<T> g(s);
  const std::size_t positions = s.b * s.voxels();
  for (std::size_t q = 0; q < positions; ++q) {
    const T* p = probs.data().data() + q * s.c;
    const T* gp = grad_out.data().data() + q * s.c;
    double dot = 0;
    for (std::size_t c = 0; c < s.c; ++c) dot += static_cast<double>(p[c]) * gp[c];
    T* gz = g.data().data() + q * s.c;
    for (std::size_t c = 0; c < s.c; ++c) gz[c] = static_cast<T>(p[c] * (gp[c] - dot));
  }
  return g;
}

#define AMBER_INSTANTIATE(T)                                                                   \
  template Volume<T> conv3d<T>(const Volume<T>&, const Tensor<T>&, std::span<const T>,         \
                               const ConvSpec&);                                               \
  template ConvGrads<T> conv3d_backward<T>(const Volume<T>&, const Tensor<T>&, const ConvSpec&, \
                                           const Volume<T>&);                                  \
  template Volume<T> conv3d_transposed<T>(const Volume<T>&, const Tensor<T>&,                  \
                                          std::span<const T>, const ConvSpec&);                \
  template ConvGrads<T> conv3d_transposed_backward<T>(const Volume<T>&, const Tensor<T>&,      \
                                                      const ConvSpec&, const Volume<T>&);      \
  template Volume<T> upsample_trilinear<T>(const Volume<T>&, const Extent3&);                  \
  template Volume<T> upsample_trilinear_backward<T>(const Volume<T>&, const Shape5&);          \
  template Volume<T> layer_norm<T>(const Volume<T>&, std::span<const T>, std::span<const T>, T, \
                                   NormCache<T>*);                                             \
  template NormGrads<T> layer_norm_backward<T>(const NormCache<T>&, std::span<const T>,        \
                                               const Volume<T>&);                              \
  template Volume<T> batch_norm3d<T>(const Volume<T>&, std::span<const T>, std::span<const T>, \
                                     BatchNormStats<T>&, T, bool, NormCache<T>*);              \
  template NormGrads<T> batch_norm3d_backward<T>(const NormCache<T>&, std::span<const T>,      \
                                                 const Volume<T>&, bool);                      \
  template T gelu_scalar<T>(T);                                                                \
  template Volume<T> gelu<T>(const Volume<T>&);                                                \
  template Volume<T> gelu_backward<T>(const Volume<T>&, const Volume<T>&);                     \
  template Volume<T> relu<T>(const Volume<T>&);                                                \
  template Volume<T> relu_backward<T>(const Volume<T>&, const Volume<T>&);                     \
  template Volume<T> softmax_channels<T>(const Volume<T>&);                                    \
  template Volume<T> softmax_channels_backward<T>(const Volume<T>&, const Volume<T>&);

AMBER_INSTANTIATE(float)
AMBER_INSTANTIATE(double)
#undef AMBER_INSTANTIATE

}  // namespace amber
