#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amber/labels.hpp"

namespace amber {

/// Physical voxel size along (D, H, W).
using Spacing = std::array<double, 3>;

/// 2|G ∩ P| / (|G| + |P|) over nonzero voxels; 1 when both are empty.
double dsc(const LabelMask& g, const LabelMask& p);

/// Foreground voxels with at least one 6-connected background neighbour.
/// Voxels outside the grid count as background.
std::vector<std::size_t> boundary_voxels(const LabelMask& mask);

/// Nearest-rank percentile: the ceil(q n / 100)-th smallest value.
double nearest_rank_percentile(std::vector<double> values, unsigned q);

/// Symmetric 95th-percentile boundary distance via an exact Euclidean distance
/// transform. nullopt when either mask is empty.
std::optional<double> hd95(const LabelMask& y, const LabelMask& p, const Spacing& spacing);

/// Same quantity from all boundary pairs; O(|∂Y| |∂P|).
std::optional<double> hd95_exhaustive(const LabelMask& y, const LabelMask& p,
                                      const Spacing& spacing);

struct ClassMetrics {
  std::size_t label = 0;
  double dsc = 0.0;
  std::optional<double> hd95;
};

struct MetricReport {
  std::vector<ClassMetrics> classes;  // every class, background included
  double mean_dsc = 0.0;              // foreground classes only
  std::optional<double> mean_hd95;    // foreground classes with a defined value
  std::size_t hd95_undefined = 0;     // foreground classes excluded from mean_hd95
};

/// One-vs-rest metrics per class. Throws InputError on labels >= num_classes.
MetricReport evaluate(const LabelMask& pred, const LabelMask& truth, std::size_t num_classes,
                      const Spacing& spacing = {1.0, 1.0, 1.0});

}  // namespace amber
