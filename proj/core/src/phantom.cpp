#include "amber/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace amber {

const char* shape_kind_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::ellipsoid: return "ellipsoid";
    case ShapeKind::box: return "box";
    case ShapeKind::tube: return "tube";
  }
  return "?";
}

ShapeKind parse_shape_kind(const std::string& text) {
  if (text == "ellipsoid") return ShapeKind::ellipsoid;
  if (text == "box") return ShapeKind::box;
  if (text == "tube") return ShapeKind::tube;
  throw ConfigError("unknown shape kind '" + text + "' (ellipsoid, box, tube)");
}

bool ShapePlacement::contains(double d, double h, double w) const {
  const double p[3] = {d - center[0], h - center[1], w - center[2]};
  switch (kind) {
    case ShapeKind::ellipsoid: {
      double s = 0.0;
      for (int a = 0; a < 3; ++a) s += (p[a] / radii[a]) * (p[a] / radii[a]);
      return s <= 1.0;
    }
    case ShapeKind::box:
      return std::abs(p[0]) <= radii[0] && std::abs(p[1]) <= radii[1] &&
             std::abs(p[2]) <= radii[2];
    case ShapeKind::tube: {
      if (std::abs(p[axis]) > radii[axis]) return false;
      double s = 0.0;
      for (int a = 0; a < 3; ++a)
        if (a != axis) s += (p[a] / radii[a]) * (p[a] / radii[a]);
      return s <= 1.0;
    }
  }
  return false;
}

void PhantomSpec::validate() const {
  if (grid.d < 1 || grid.h < 1 || grid.w < 1) throw ConfigError("data.grid has a zero axis");
  if (grid.w % 2 != 0) throw ConfigError("data.grid width must be even (AFNO constraint)");
  if (num_classes < 2 || num_classes > 255) throw ConfigError("data.num_classes must be in [2, 255]");
  if (classes.size() > num_classes - 1) {
    throw ConfigError("data: shape entries for " + std::to_string(classes.size()) +
                      " classes but only " + std::to_string(num_classes - 1) + " foreground");
  }
  if (class_mean.size() != num_classes || class_sigma.size() != num_classes) {
    throw ConfigError("data.class_mean and data.class_sigma need one entry per class");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("data.noise_sigma must be >= 0");
  for (double s : class_sigma)
    if (!(s >= 0.0)) throw ConfigError("data.class_sigma entries must be >= 0");
  const std::size_t min_extent = std::min({grid.d, grid.h, grid.w});
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const ClassShapes& c = classes[k];
    if (c.min_count > c.max_count) throw ConfigError("data: min_count > max_count");
    if (!(c.min_radius > 0.0) || c.min_radius > c.max_radius) {
      throw ConfigError("data: radius range must satisfy 0 < min_radius <= max_radius");
    }
    if (2.0 * c.max_radius + 1.0 > static_cast<double>(min_extent)) {
      throw ConfigError("data: radius " + std::to_string(c.max_radius) +
                        " does not fit in grid " + grid.str());
    }
  }
  for (const auto& s : fixed) {
    if (s.label >= num_classes) throw ConfigError("data: fixed shape label out of range");
    if (s.axis < 0 || s.axis > 2) throw ConfigError("data: tube axis must be 0, 1 or 2");
    const double ext[3] = {double(grid.d), double(grid.h), double(grid.w)};
    for (int a = 0; a < 3; ++a)
      if (!(s.radii[a] > 0.0) || 2.0 * s.radii[a] > ext[a]) {
        throw ConfigError("data: fixed shape radius exceeds grid " + grid.str());
      }
  }
}

std::size_t rasterized_count(const ShapePlacement& shape, const Extent3& grid) {
  std::size_t n = 0;
  for (std::size_t d = 0; d < grid.d; ++d)
    for (std::size_t h = 0; h < grid.h; ++h)
      for (std::size_t w = 0; w < grid.w; ++w) n += shape.contains(double(d), double(h), double(w));
  return n;
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  std::vector<ShapePlacement> shapes;
  const double ext[3] = {double(spec.grid.d), double(spec.grid.h), double(spec.grid.w)};
  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    const ClassShapes& c = spec.classes[k];
    const std::size_t count =
        std::uniform_int_distribution<std::size_t>(c.min_count, c.max_count)(rng);
    for (std::size_t n = 0; n < count; ++n) {
      ShapePlacement s;
      s.kind = c.kind;
      s.label = static_cast<std::uint8_t>(k + 1);
      s.axis = static_cast<int>(std::uniform_int_distribution<int>(0, 2)(rng));
      for (int a = 0; a < 3; ++a) {
        s.radii[a] = c.min_radius == c.max_radius ? c.min_radius : uniform(c.min_radius, c.max_radius);
        s.center[a] = uniform(s.radii[a], ext[a] - 1.0 - s.radii[a]);
      }
      shapes.push_back(s);
    }
  }
  shapes.insert(shapes.end(), spec.fixed.begin(), spec.fixed.end());

  Phantom out{Volume<float>(Shape5{1, spec.grid.d, spec.grid.h, spec.grid.w, 1}),
              LabelMask(spec.grid)};
  for (std::size_t d = 0; d < spec.grid.d; ++d)
    for (std::size_t h = 0; h < spec.grid.h; ++h)
      for (std::size_t w = 0; w < spec.grid.w; ++w)
        for (const auto& s : shapes)
          if (s.contains(double(d), double(h), double(w))) out.mask.at(d, h, w) = s.label;

  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t v = 0; v < spec.grid.voxels(); ++v) {
    const std::size_t label = out.mask.labels[v];
    const double texture = spec.class_sigma[label] * normal(rng);
    const double noise = spec.noise_sigma * normal(rng);
    out.image[v] = static_cast<float>(spec.class_mean[label] + texture + noise);
  }
  return out;
}

}  // namespace amber
