#include "amber/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace amber {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckResult gradient_check(SegmentationModel<double>& model, const Volume<double>& input,
                               const std::vector<LabelMask>& truth, const TrainConfig& config,
                               const GradCheckOptions& options) {
  auto& params = model.parameters().all();
  std::mt19937_64 rng(options.seed);
  if (options.perturb > 0.0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& p : params) {
      if (!p.trainable) continue;
      const double s = options.perturb / std::sqrt(static_cast<double>(p.fan_in));
      for (auto& v : p.value.data()) v += s * u(rng);
    }
  }

  loss_and_gradients(model, input, truth, config);
  std::vector<std::vector<double>> analytic;
  std::vector<std::size_t> trainable;
  std::size_t total_scalars = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    analytic.emplace_back(params[i].grad.data().begin(), params[i].grad.data().end());
    if (params[i].trainable) {
      trainable.push_back(i);
      total_scalars += params[i].value.size();
    }
  }

  std::set<std::pair<std::size_t, std::size_t>> picks;
  for (std::size_t i : trainable) {
    picks.insert({i, std::uniform_int_distribution<std::size_t>(0, params[i].value.size() - 1)(rng)});
  }
  std::uniform_int_distribution<std::size_t> any(0, total_scalars - 1);
  const std::size_t target = std::min(std::max(options.samples, picks.size()), total_scalars);
  while (picks.size() < target) {
    std::size_t flat = any(rng);
    for (std::size_t i : trainable) {
      if (flat < params[i].value.size()) {
        picks.insert({i, flat});
        break;
      }
      flat -= params[i].value.size();
    }
  }

  auto loss_at = [&]() {
    ModelOutput<double> out = model.forward(input, true);
    return deep_supervised_loss(out.logits, out.aux, truth, config.resolved_supervision_weights(),
                                config.loss_epsilon);
  };

  GradCheckResult r;
  r.tensors_total = trainable.size();
  std::set<std::size_t> covered;
  for (const auto& [i, k] : picks) {
    double& v = params[i].value[k];
    const double saved = v;
    v = saved + options.step;
    const double up = loss_at();
    v = saved - options.step;
    const double down = loss_at();
    v = saved;
    GradCheckEntry e{params[i].name, k, analytic[i][k], (up - down) / (2.0 * options.step), 0.0};
    e.rel_error = relative_error(e.analytic, e.numeric, options.floor);
    r.max_rel_error = std::max(r.max_rel_error, e.rel_error);
    r.entries.push_back(std::move(e));
    covered.insert(i);
  }
  r.tensors_covered = covered.size();
  return r;
}

}  // namespace amber
