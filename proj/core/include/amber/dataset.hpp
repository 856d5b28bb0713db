#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amber/labels.hpp"
#include "amber/phantom.hpp"
#include "amber/tensor.hpp"

namespace amber {

struct Sample {
  std::string id;
  Volume<float> image;  // (1, D, H, W, C)
  LabelMask mask;
};

struct SampleEntry {
  std::string id;
  std::string image;  // base path relative to the dataset directory
  std::string mask;
  std::string image_fnv1a64;
  std::string mask_fnv1a64;
};

struct DatasetManifest {
  std::size_t num_classes = 0;
  Extent3 grid;
  std::uint64_t seed = 0;
  std::vector<SampleEntry> samples;
};

/// Per-sample seeds derive from `seed` and the sample index.
std::vector<Sample> generate_dataset(const PhantomSpec& spec, std::size_t count,
                                     std::uint64_t seed);

/// Writes sample_XXX_image / sample_XXX_mask pairs and manifest.json.
DatasetManifest write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                              std::size_t num_classes, std::uint64_t seed);

/// Reads and hash-verifies every sample listed in manifest.json.
std::vector<Sample> read_dataset(const std::filesystem::path& dir,
                                 DatasetManifest* manifest = nullptr);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// round(n * fraction) training indices, the rest held out; both sorted.
Split make_splits(std::size_t n, double train_fraction, std::uint64_t seed);

}  // namespace amber
