#include "amber/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace amber {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_extent(const LabelMask& a, const LabelMask& b, const char* op) {
  if (!(a.dims == b.dims)) {
    throw InputError(std::string(op) + ": extent " + a.dims.str() + " vs " + b.dims.str());
  }
}

// Lower envelope of parabolas (x - i s)^2 + f[i] over finite samples, evaluated at every i.
void edt_line(std::vector<double>& f, double s, std::vector<std::size_t>& v,
              std::vector<double>& z, std::vector<double>& out) {
  const std::size_t n = f.size();
  std::size_t k = 0;
  bool any = false;
  auto pos = [s](std::size_t i) { return static_cast<double>(i) * s; };
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (!any) {
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      k = 0;
      any = true;
      continue;
    }
    double sect = 0.0;
    while (true) {
      const std::size_t p = v[k];
      sect = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)));
      if (k > 0 && sect <= z[k]) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = sect;
    z[k + 1] = kInf;
  }
  if (!any) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < pos(q)) ++k;
    const double d = static_cast<double>(static_cast<long>(q) - static_cast<long>(v[k])) * s;
    out[q] = d * d + f[v[k]];
  }
}

// Squared distance from every voxel to the nearest seed, separable over W, H, D.
std::vector<double> squared_edt(const Extent3& e, const std::vector<std::size_t>& seeds,
                                const Spacing& spacing) {
  std::vector<double> g(e.voxels(), kInf);
  for (std::size_t i : seeds) g[i] = 0.0;
  const std::size_t nmax = std::max({e.d, e.h, e.w});
  std::vector<double> line(nmax), out(nmax), z(nmax + 1);
  std::vector<std::size_t> v(nmax);
  auto pass = [&](std::size_t n, std::size_t stride, std::size_t outer_count,
                  auto&& base_of, double s) {
    line.resize(n);
    out.resize(n);
    for (std::size_t o = 0; o < outer_count; ++o) {
      const std::size_t base = base_of(o);
      for (std::size_t i = 0; i < n; ++i) line[i] = g[base + i * stride];
      edt_line(line, s, v, z, out);
      for (std::size_t i = 0; i < n; ++i) g[base + i * stride] = out[i];
    }
  };
  pass(e.w, 1, e.d * e.h, [&](std::size_t o) { return o * e.w; }, spacing[2]);
  pass(e.h, e.w, e.d * e.w,
       [&](std::size_t o) { return (o / e.w) * e.h * e.w + o % e.w; }, spacing[1]);
  pass(e.d, e.h * e.w, e.h * e.w, [&](std::size_t o) { return o; }, spacing[0]);
  return g;
}

double one_sided_d95(const std::vector<std::size_t>& from, const std::vector<double>& sq_dist) {
  std::vector<double> d;
  d.reserve(from.size());
  for (std::size_t i : from) d.push_back(std::sqrt(sq_dist[i]));
  return nearest_rank_percentile(std::move(d), 95);
}

}  // namespace

double dsc(const LabelMask& g, const LabelMask& p) {
  require_same_extent(g, p, "dsc");
  std::size_t inter = 0, ng = 0, np = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool a = g.labels[i] != 0, b = p.labels[i] != 0;
    ng += a;
    np += b;
    inter += a && b;
  }
  if (ng + np == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(ng + np);
}

std::vector<std::size_t> boundary_voxels(const LabelMask& mask) {
  const Extent3& e = mask.dims;
  std::vector<std::size_t> out;
  auto bg = [&](long d, long h, long w) {
    if (d < 0 || h < 0 || w < 0 || d >= static_cast<long>(e.d) || h >= static_cast<long>(e.h) ||
        w >= static_cast<long>(e.w))
      return true;
    return mask.at(d, h, w) == 0;
  };
  for (std::size_t d = 0; d < e.d; ++d)
    for (std::size_t h = 0; h < e.h; ++h)
      for (std::size_t w = 0; w < e.w; ++w) {
        if (mask.at(d, h, w) == 0) continue;
        const long D = static_cast<long>(d), H = static_cast<long>(h), W = static_cast<long>(w);
        if (bg(D - 1, H, W) || bg(D + 1, H, W) || bg(D, H - 1, W) || bg(D, H + 1, W) ||
            bg(D, H, W - 1) || bg(D, H, W + 1))
          out.push_back(mask.index(d, h, w));
      }
  return out;
}

double nearest_rank_percentile(std::vector<double> values, unsigned q) {
  if (values.empty()) throw InputError("percentile of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const std::size_t rank = std::max<std::size_t>(1, (q * n + 99) / 100);
  return values[rank - 1];
}

std::optional<double> hd95(const LabelMask& y, const LabelMask& p, const Spacing& spacing) {
  require_same_extent(y, p, "hd95");
  const auto by = boundary_voxels(y);
  const auto bp = boundary_voxels(p);
  if (by.empty() || bp.empty()) return std::nullopt;
  const auto to_p = squared_edt(p.dims, bp, spacing);
  const auto to_y = squared_edt(y.dims, by, spacing);
  return std::max(one_sided_d95(by, to_p), one_sided_d95(bp, to_y));
}

std::optional<double> hd95_exhaustive(const LabelMask& y, const LabelMask& p,
                                      const Spacing& spacing) {
  require_same_extent(y, p, "hd95_exhaustive");
  const auto by = boundary_voxels(y);
  const auto bp = boundary_voxels(p);
  if (by.empty() || bp.empty()) return std::nullopt;
  const Extent3& e = y.dims;
  auto coords = [&](std::size_t i) {
    return std::array<double, 3>{static_cast<double>(i / (e.h * e.w)),
                                 static_cast<double>((i / e.w) % e.h),
                                 static_cast<double>(i % e.w)};
  };
  auto directed = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::vector<double> d;
    d.reserve(a.size());
    for (std::size_t i : a) {
      const auto ca = coords(i);
      double best = kInf;
      for (std::size_t j : b) {
        const auto cb = coords(j);
        const double dd = (ca[0] - cb[0]) * spacing[0];
        const double dh = (ca[1] - cb[1]) * spacing[1];
        const double dw = (ca[2] - cb[2]) * spacing[2];
        best = std::min(best, dd * dd + (dh * dh + dw * dw));
      }
      d.push_back(std::sqrt(best));
    }
    return nearest_rank_percentile(std::move(d), 95);
  };
  return std::max(directed(by, bp), directed(bp, by));
}

MetricReport evaluate(const LabelMask& pred, const LabelMask& truth, std::size_t num_classes,
                      const Spacing& spacing) {
  require_same_extent(pred, truth, "evaluate");
  check_labels(pred, num_classes);
  check_labels(truth, num_classes);
  MetricReport r;
  double dsc_sum = 0.0, hd_sum = 0.0;
  std::size_t hd_count = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto cls = static_cast<std::uint8_t>(c);
    const LabelMask p = binarize(pred, cls), t = binarize(truth, cls);
    ClassMetrics m{c, dsc(t, p), hd95(t, p, spacing)};
    if (c > 0) {
      dsc_sum += m.dsc;
      if (m.hd95) {
        hd_sum += *m.hd95;
        ++hd_count;
      } else {
        ++r.hd95_undefined;
      }
    }
    r.classes.push_back(m);
  }
  if (num_classes > 1) r.mean_dsc = dsc_sum / static_cast<double>(num_classes - 1);
  if (hd_count) r.mean_hd95 = hd_sum / static_cast<double>(hd_count);
  return r;
}

}  // namespace amber
