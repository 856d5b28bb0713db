// Acceptance runner: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "amber/afno.hpp"
#include "amber/checkpoint.hpp"
#include "amber/dataset.hpp"
#include "amber/fft.hpp"
#include "amber/gradcheck.hpp"
#include "amber/loss.hpp"
#include "amber/metrics.hpp"
#include "amber/model.hpp"
#include "amber/model_stats.hpp"
#include "amber/ops.hpp"
#include "amber/trainer.hpp"

using namespace amber;
namespace fs = std::filesystem;
using cd = std::complex<double>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

Volume<double> random_volume(const Shape5& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Volume<double> v(shape);
  for (auto& x : v.storage()) x = u(rng);
  return v;
}

// ---------------------------------------------------------------- 1: FFT

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

// Energy of the full spectrum reconstructed from the half spectrum.
double half_spectrum_energy(const ComplexVolume<double>& X, std::size_t width) {
  const Shape5 s = X.shape();
  double e = 0.0;
  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t d = 0; d < s.d; ++d)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t w = 0; w < s.w; ++w)
          for (std::size_t c = 0; c < s.c; ++c) {
            const bool mirrored = w != 0 && !(width % 2 == 0 && w == width / 2);
            e += (mirrored ? 2.0 : 1.0) * std::norm(X.at(b, d, h, w, c));
          }
  return e;
}

Outcome criterion_fft() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  double dft = 0.0, round_trip = 0.0, parseval = 0.0;
  std::size_t shapes = 0;
  for (std::size_t d : {1, 2, 3, 4, 8})
    for (std::size_t h : {1, 2, 3, 4, 8})
      for (std::size_t w : {2, 4, 8}) {
        const auto x = random_volume({1, d, h, w, 2}, rng);
        const auto X = rfft3(x);
        const auto ref = naive_rfft3(x);
        for (std::size_t i = 0; i < X.size(); ++i) dft = std::max(dft, std::abs(X[i] - ref[i]));
        const auto back = irfft3(X, w);
        for (std::size_t i = 0; i < x.size(); ++i)
          round_trip = std::max(round_trip, std::abs(back[i] - x[i]));
        double energy = 0.0;
        for (double v : x.data()) energy += v * v;
        const double spectral = half_spectrum_energy(X, w) / double(d * h * w);
        parseval = std::max(parseval, std::abs(spectral - energy) / energy);
        ++shapes;
      }
  const double secs = seconds_since(t0);
  const bool pass = dft < 1e-10 && round_trip < 1e-10 && parseval < 1e-10 && secs < 10.0;
  return {pass, std::to_string(shapes) + " shapes, max |rfft3 - DFT| " + fmt(dft) +
                    ", round trip " + fmt(round_trip) + ", Parseval rel " + fmt(parseval) + ", " +
                    fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- 2: gradients

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.dims = {4, 8, 12, 16};
  cfg.depths = {1, 1, 1, 1};
  cfg.afno_blocks = {1, 2, 2, 2};
  cfg.mhsa_heads = {1, 2, 2, 4};
  cfg.num_classes = 2;
  return cfg;
}

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(7);
  SegmentationModel<double> model(tiny_config(), 7);
  const auto x = random_volume({1, 4, 4, 4, 1}, rng);
  LabelMask truth({4, 4, 4});
  std::bernoulli_distribution coin(0.5);
  for (auto& v : truth.labels) v = coin(rng) ? 1 : 0;
  GradCheckOptions opt;
  opt.samples = 256;
  opt.seed = 7;
  const auto r = gradient_check(model, x, {truth}, TrainConfig{}, opt);
  std::string worst;
  for (const auto& e : r.entries)
    if (e.rel_error == r.max_rel_error) worst = e.tensor;
  const double secs = seconds_since(t0);
  const bool pass = r.max_rel_error < 1e-4 && r.entries.size() >= 200 &&
                    r.tensors_covered == r.tensors_total && secs < 120.0;
  return {pass, std::to_string(r.entries.size()) + " entries over " + std::to_string(r.tensors_covered) +
                    "/" + std::to_string(r.tensors_total) + " tensors, max rel error " +
                    fmt(r.max_rel_error) + " (" + worst + "), " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- 3: residual identity

Outcome criterion_identity() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> side(1, 6), half_w(1, 4), blocks_log(0, 2);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    AfnoConfig cfg;
    cfg.num_blocks = std::size_t(1) << blocks_log(rng);
    cfg.channels = cfg.num_blocks * (1 + trial % 3);
    cfg.shrink_threshold = 0.01;
    const auto x = random_volume({1 + std::size_t(trial % 2), side(rng), side(rng), 2 * half_w(rng), cfg.channels}, rng);
    const auto y = afno3d_forward(x, cfg, AfnoWeights<double>::zeros(cfg));
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(y[i] - x[i]));
  }
  return {worst == 0.0, "20 random inputs, max |y - x| " + fmt(worst)};
}

// ---------------------------------------------------------------- 4: metric oracles

LabelMask random_binary(const Extent3& e, std::mt19937_64& rng) {
  const double density = std::uniform_real_distribution<double>(0.05, 0.8)(rng);
  std::bernoulli_distribution on(density);
  LabelMask m(e);
  for (auto& v : m.labels) v = on(rng) ? 1 : 0;
  return m;
}

std::optional<double> brute_force_hd95(const LabelMask& y, const LabelMask& p) {
  auto boundary = [](const LabelMask& m) {
    std::vector<std::array<long, 3>> out;
    const long D = long(m.dims.d), H = long(m.dims.h), W = long(m.dims.w);
    auto fg = [&](long d, long h, long w) {
      return d >= 0 && h >= 0 && w >= 0 && d < D && h < H && w < W && m.at(d, h, w) != 0;
    };
    for (long d = 0; d < D; ++d)
      for (long h = 0; h < H; ++h)
        for (long w = 0; w < W; ++w)
          if (fg(d, h, w) && (!fg(d - 1, h, w) || !fg(d + 1, h, w) || !fg(d, h - 1, w) ||
                              !fg(d, h + 1, w) || !fg(d, h, w - 1) || !fg(d, h, w + 1)))
            out.push_back({d, h, w});
    return out;
  };
  const auto by = boundary(y), bp = boundary(p);
  if (by.empty() || bp.empty()) return std::nullopt;
  auto directed = [](const auto& a, const auto& b) {
    std::vector<double> mins;
    for (const auto& u : a) {
      long best = -1;
      for (const auto& v : b) {
        const long dd = u[0] - v[0], dh = u[1] - v[1], dw = u[2] - v[2];
        const long sq = dd * dd + dh * dh + dw * dw;
        if (best < 0 || sq < best) best = sq;
      }
      mins.push_back(std::sqrt(double(best)));
    }
    std::sort(mins.begin(), mins.end());
    return mins[std::size_t(std::ceil(0.95 * double(mins.size()))) - 1];
  };
  return std::max(directed(by, bp), directed(bp, by));
}

Outcome criterion_metrics() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> side(1, 8);
  std::size_t dsc_mismatch = 0, hd_mismatch = 0, defined = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Extent3 e{side(rng), side(rng), side(rng)};
    const auto g = random_binary(e, rng), p = random_binary(e, rng);
    std::size_t overlap = 0, ng = 0, np = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      overlap += (g.labels[i] && p.labels[i]) ? 1 : 0;
      ng += g.labels[i] ? 1 : 0;
      np += p.labels[i] ? 1 : 0;
    }
    const double expected = ng + np ? 2.0 * double(overlap) / double(ng + np) : 1.0;
    if (dsc(g, p) != expected) ++dsc_mismatch;
    const auto fast = hd95(g, p, {1, 1, 1});
    const auto oracle = brute_force_hd95(g, p);
    if (fast.has_value() != oracle.has_value() || (fast && *fast != *oracle)) ++hd_mismatch;
    if (oracle) ++defined;
  }
  const double secs = seconds_since(t0);
  return {dsc_mismatch == 0 && hd_mismatch == 0 && secs < 60.0,
          "200 pairs up to 8^3: DSC mismatches " + std::to_string(dsc_mismatch) + ", HD95 mismatches " +
              std::to_string(hd_mismatch) + " (" + std::to_string(defined) + " defined), " +
              fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- 5: loss sanity

Outcome criterion_loss() {
  std::mt19937_64 rng(5);
  const std::size_t classes = 3;
  LabelMask m({4, 4, 4});
  std::uniform_int_distribution<int> label(0, int(classes) - 1);
  for (auto& v : m.labels) v = std::uint8_t(label(rng));
  const auto G = one_hot<double>({m}, classes);
  const double perfect = hybrid_loss(G, G, 1e-5);
  bool monotone = true;
  double previous = INFINITY, first = 0.0;
  for (int step = 0; step <= 50; ++step) {
    const double t = step / 50.0;
    Volume<double> P(G.shape());
    for (std::size_t i = 0; i < P.size(); ++i) P[i] = (1 - t) / double(classes) + t * G[i];
    const double loss = hybrid_loss(P, G, 1e-5);
    if (step == 0) first = loss;
    monotone = monotone && loss < previous;
    previous = loss;
  }
  return {perfect < 1e-6 && monotone, "L(G, G) = " + fmt(perfect) + ", sweep " + fmt(first) + " -> " +
                                          fmt(previous) + (monotone ? " strictly decreasing" : " NOT monotone")};
}

// ---------------------------------------------------------------- 6: learnability

Outcome criterion_learnability() {
  const auto t0 = Clock::now();
  PhantomSpec spec;
  spec.grid = {16, 16, 16};
  spec.classes = {ClassShapes{ShapeKind::ellipsoid, 1, 2, 3.0, 5.0}};
  spec.noise_sigma = 0.2;
  const auto samples = generate_dataset(spec, 20, 42);
  const Split split = make_splits(samples.size(), 0.8, 42);
  std::vector<Sample> train_set, heldout;
  for (auto i : split.train) train_set.push_back(samples[i]);
  for (auto i : split.test) heldout.push_back(samples[i]);

  ModelConfig cfg;
  cfg.dims = {8, 16, 32, 64};
  cfg.depths = {2, 2, 2, 2};
  SegmentationModel<float> model(cfg, 1);
  TrainConfig tc;
  tc.sgd = {0.01, 0.9, 3e-5};
  tc.batch_size = 2;
  tc.max_steps = 500;
  tc.epochs = (tc.max_steps + train_set.size() / tc.batch_size - 1) / (train_set.size() / tc.batch_size);
  tc.seed = 1;
  double best = 0.0;
  std::optional<std::size_t> reached;
  train(model, train_set, heldout, tc, [&](const EpochRecord& r) {
    if (!r.heldout_dsc) return;
    best = std::max(best, *r.heldout_dsc);
    if (!reached && *r.heldout_dsc >= 0.90) reached = r.steps;
  });
  const double secs = seconds_since(t0);
  return {reached.has_value(),
          std::to_string(train_set.size()) + " train / " + std::to_string(heldout.size()) +
              " held out, best held-out DSC " + fmt(best) +
              (reached ? ", >= 0.90 at step " + std::to_string(*reached) : ", never >= 0.90 in 500 steps") +
              ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- 7: efficiency direction

Outcome criterion_efficiency() {
  ModelConfig afno;
  afno.dims = {23, 64, 128, 256};
  ModelConfig mhsa = afno;
  mhsa.mixing = MixingKind::mhsa;
  const SegmentationModel<float> a(afno, 0), m(mhsa, 0);
  const double pa = double(count_params(a.parameters()).total_params);
  const double pm = double(count_params(m.parameters()).total_params);
  const auto fa = count_flops(afno, {16, 16, 16}).total_flops;
  const auto fm = count_flops(mhsa, {16, 16, 16}).total_flops;
  const double ratio = pa / pm;
  return {ratio < 0.5 && fa < fm,
          "params " + fmt(pa, 10) + " / " + fmt(pm, 10) + " = " + fmt(ratio) +
              (ratio < 0.5 ? " < 0.5" : " NOT < 0.5") + "; FLOPs at 16^3 " + std::to_string(fa) +
              (fa < fm ? " < " : " NOT < ") + std::to_string(fm)};
}

// ---------------------------------------------------------------- 8: ablation determinism

Outcome criterion_ablation() {
  const fs::path root = fs::temp_directory_path() / "amber_acceptance_ablation";
  fs::remove_all(root);
  ModelConfig afno;
  ModelConfig mhsa = afno;
  mhsa.mixing = MixingKind::mhsa;
  save_checkpoint(root / "afno", SegmentationModel<float>(afno, 11));
  save_checkpoint(root / "mhsa", SegmentationModel<float>(mhsa, 11));
  const auto ma = read_checkpoint_manifest(root / "afno");
  const auto mm = read_checkpoint_manifest(root / "mhsa");
  fs::remove_all(root);

  std::map<std::string, const TensorRecord*> left, right;
  for (const auto& t : ma.tensors) left[t.name] = &t;
  for (const auto& t : mm.tensors) right[t.name] = &t;
  std::set<std::string> changed, mixing;
  for (const auto& [name, t] : left) {
    const auto it = right.find(name);
    if (it == right.end() || it->second->shape != t->shape || it->second->fnv1a64 != t->fnv1a64)
      changed.insert(name);
  }
  for (const auto& [name, t] : right)
    if (!left.count(name)) changed.insert(name);
  for (const auto* side : {&left, &right})
    for (const auto& [name, t] : *side)
      if (name.find(".mixing.") != std::string::npos) mixing.insert(name);
  std::size_t stray = 0;
  for (const auto& n : changed) stray += mixing.count(n) ? 0 : 1;
  return {changed == mixing,
          std::to_string(changed.size()) + " tensors differ, " + std::to_string(mixing.size()) +
              " mixing tensors, " + std::to_string(stray) + " non-mixing differences, " +
              std::to_string(left.size() - std::count_if(left.begin(), left.end(), [&](const auto& kv) {
                               return changed.count(kv.first) > 0;
                             })) +
              " shared tensors identical"};
}

// ---------------------------------------------------------------- 9: FLOP scaling

Outcome criterion_scaling() {
  AfnoConfig a;
  a.channels = 64;
  a.num_blocks = 8;
  const std::vector<std::size_t> sides{4, 8, 16};
  bool pass = true;
  std::string detail;
  for (std::size_t i = 1; i < sides.size(); ++i) {
    const Extent3 e0{sides[i - 1], sides[i - 1], sides[i - 1]}, e1{sides[i], sides[i], sides[i]};
    const double l0 = double(e0.voxels()), l1 = double(e1.voxels());
    const double mhsa = double(mhsa_attention_flops(e1.voxels(), 64, 1)) /
                        double(mhsa_attention_flops(e0.voxels(), 64, 1));
    const double quad = (l1 / l0) * (l1 / l0);
    const double afno = rfft3_flops(e1, 64, 1) / rfft3_flops(e0, 64, 1);
    const double nlogn = (l1 * std::log2(l1)) / (l0 * std::log2(l0));
    const double dm = std::abs(mhsa / quad - 1.0), da = std::abs(afno / nlogn - 1.0);
    pass = pass && dm <= 0.05 && da <= 0.10;
    if (!detail.empty()) detail += "; ";
    detail += "L " + fmt(l0, 6) + "->" + fmt(l1, 6) + ": MHSA x" + fmt(mhsa) + " vs L^2 x" + fmt(quad) +
              " (" + fmt(100 * dm, 3) + "%), AFNO x" + fmt(afno) + " vs NlogN x" + fmt(nlogn) + " (" +
              fmt(100 * da, 3) + "%)";
  }
  return {pass, detail};
}

// ---------------------------------------------------------------- 10: shape contract

Outcome criterion_shapes() {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<std::size_t> small(1, 3), depth(0, 2), stride(1, 2), side(1, 5),
      classes(2, 4);
  std::size_t legal = 0, drawn = 0, wrong = 0;
  std::string first_wrong;
  while (legal < 50) {
    ++drawn;
    ModelConfig cfg;
    const std::size_t base = 2 * small(rng);
    cfg.dims = {base, 2 * base, 3 * base, 4 * base};
    cfg.depths = {depth(rng), depth(rng), depth(rng), depth(rng)};
    cfg.strides = {stride(rng), stride(rng), stride(rng), stride(rng)};
    cfg.afno_blocks = {1, 2, small(rng) == 3 ? std::size_t{3} : std::size_t{1}, 2};
    cfg.mhsa_heads = {1, 2, 1, 2};
    cfg.decoder_dim = 4 * small(rng);
    cfg.num_classes = classes(rng);
    cfg.mixing = rng() % 2 ? MixingKind::afno : MixingKind::mhsa;
    const Extent3 input{2 * side(rng), 2 * side(rng), 2 * side(rng)};
    try {
      cfg.validate();
      cfg.validate_input(input);
    } catch (const ConfigError&) {
      continue;
    }
    ++legal;
    SegmentationModel<float> model(cfg, legal);
    std::mt19937_64 xr(drawn);
    Volume<float> x(Shape5{1, input.d, input.h, input.w, cfg.in_channels});
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (auto& v : x.data()) v = u(xr);
    const auto out = model.forward(x, false);
    const Shape5 s = out.logits.shape();
    if (!(spatial(s) == input) || s.c != cfg.num_classes) {
      ++wrong;
      if (first_wrong.empty()) first_wrong = " (first: input " + std::to_string(input.d) + "x" +
                                             std::to_string(input.h) + "x" + std::to_string(input.w) + ")";
    }
  }
  return {wrong == 0, std::to_string(legal) + " legal configs of " + std::to_string(drawn) + " drawn, " +
                          std::to_string(wrong) + " with output extent != input extent" + first_wrong};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner", "amber_acceptance"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Criterion number(s) to run; default all")
      ->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (int i = 1; i <= 10; ++i) selected.push_back(i);

  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"FFT correctness", criterion_fft}},
      {2, {"gradient correctness", criterion_gradients}},
      {3, {"residual identity", criterion_identity}},
      {4, {"metric oracles", criterion_metrics}},
      {5, {"loss sanity", criterion_loss}},
      {6, {"learnability", criterion_learnability}},
      {7, {"efficiency direction", criterion_efficiency}},
      {8, {"ablation determinism", criterion_ablation}},
      {9, {"FLOP scaling", criterion_scaling}},
      {10, {"shape contract", criterion_shapes}},
  };
  int failures = 0;
  for (int n : selected) {
    const auto& [name, run] = criteria.at(n);
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << n << " (" << name << "): " << (o.pass ? "PASS" : "FAIL") << "  "
              << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
