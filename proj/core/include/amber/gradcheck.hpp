#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amber/trainer.hpp"

namespace amber {

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t samples = 256;
  std::uint64_t seed = 1;
  /// Denominator floor in |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Uniform perturbation added to every trainable entry before checking,
  /// scaled by 1 / sqrt(fan_in), so no branch starts near zero. 0 disables.
  double perturb = 0.3;
};

struct GradCheckEntry {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckResult {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::size_t tensors_total = 0;
  std::size_t tensors_covered = 0;
};

double relative_error(double analytic, double numeric, double floor);

/// Central differences of the deep-supervised loss against reverse-mode gradients.
/// Every trainable tensor contributes at least one sampled entry.
GradCheckResult gradient_check(SegmentationModel<double>& model, const Volume<double>& input,
                               const std::vector<LabelMask>& truth, const TrainConfig& config,
                               const GradCheckOptions& options = {});

}  // namespace amber
