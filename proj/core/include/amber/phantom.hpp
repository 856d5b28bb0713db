#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "amber/labels.hpp"
#include "amber/tensor.hpp"

namespace amber {

enum class ShapeKind { ellipsoid, box, tube };

const char* shape_kind_name(ShapeKind kind);
ShapeKind parse_shape_kind(const std::string& text);

/// One rasterized primitive. Coordinates are voxel indices (centres at integers).
/// Tubes run along `axis` with half-length radii[axis] and elliptical cross-section.
struct ShapePlacement {
  ShapeKind kind = ShapeKind::ellipsoid;
  std::uint8_t label = 1;
  std::array<double, 3> center{0, 0, 0};
  std::array<double, 3> radii{1, 1, 1};
  int axis = 0;

  bool contains(double d, double h, double w) const;
};

/// Random shapes for one foreground class.
struct ClassShapes {
  ShapeKind kind = ShapeKind::ellipsoid;
  std::size_t min_count = 1;
  std::size_t max_count = 1;
  double min_radius = 2.0;
  double max_radius = 4.0;
};

struct PhantomSpec {
  Extent3 grid{16, 16, 16};
  std::size_t num_classes = 2;
  /// Entry k describes label k + 1; missing entries draw no random shapes.
  std::vector<ClassShapes> classes{ClassShapes{}};
  /// Rasterized after the random shapes.
  std::vector<ShapePlacement> fixed;
  std::vector<double> class_mean{0.0, 1.0};
  std::vector<double> class_sigma{0.0, 0.0};
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Phantom {
  Volume<float> image;  // (1, D, H, W, 1)
  LabelMask mask;
};

/// Later shapes overwrite earlier ones; intensity = class mean + class texture + noise.
Phantom generate_phantom(const PhantomSpec& spec);

/// Voxel count of a shape on a grid by direct enumeration.
std::size_t rasterized_count(const ShapePlacement& shape, const Extent3& grid);

}  // namespace amber
