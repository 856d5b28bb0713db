#include "amber/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "amber/parameters.hpp"
#include "amber/volume_io.hpp"

namespace amber {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sample_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%03zu", i);
  return buf;
}

std::string payload_hash(const fs::path& base) {
  return hex64(fnv1a64(read_file(payload_path(base))));
}

}  // namespace

std::vector<Sample> generate_dataset(const PhantomSpec& spec, std::size_t count,
                                     std::uint64_t seed) {
  spec.validate();
  std::vector<Sample> out;
  for (std::size_t i = 0; i < count; ++i) {
    PhantomSpec s = spec;
    s.seed = parameter_seed(seed, sample_id(i));
    Phantom p = generate_phantom(s);
    out.push_back({sample_id(i), std::move(p.image), std::move(p.mask)});
  }
  return out;
}

DatasetManifest write_dataset(const fs::path& dir, const std::vector<Sample>& samples,
                              std::size_t num_classes, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create dataset directory '" + dir.string() + "'");
  }
  DatasetManifest m;
  m.num_classes = num_classes;
  m.seed = seed;
  if (!samples.empty()) m.grid = samples.front().mask.dims;
  json entries = json::array();
  for (const Sample& s : samples) {
    SampleEntry e{s.id, s.id + "_image", s.id + "_mask", "", ""};
    write_volume(dir / e.image, s.image);
    write_mask(dir / e.mask, s.mask, num_classes);
    e.image_fnv1a64 = payload_hash(dir / e.image);
    e.mask_fnv1a64 = payload_hash(dir / e.mask);
    entries.push_back({{"id", e.id},
                       {"image", e.image},
                       {"mask", e.mask},
                       {"image_fnv1a64", e.image_fnv1a64},
                       {"mask_fnv1a64", e.mask_fnv1a64}});
    m.samples.push_back(e);
  }
  json j = {{"format", "amber-dataset"},
            {"version", 1},
            {"count", samples.size()},
            {"num_classes", num_classes},
            {"grid", {m.grid.d, m.grid.h, m.grid.w}},
            {"seed", seed},
            {"samples", entries}};
  write_file(dir / "manifest.json", j.dump(2) + "\n");
  return m;
}

std::vector<Sample> read_dataset(const fs::path& dir, DatasetManifest* manifest) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory '" + dir.string() + "' not found");
  const fs::path mp = dir / "manifest.json";
  json j;
  try {
    j = json::parse(read_file(mp));
  } catch (const json::exception& e) {
    throw FormatError("'" + mp.string() + "': " + e.what());
  }
  DatasetManifest m;
  std::vector<Sample> out;
  try {
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.seed = j.value("seed", std::uint64_t{0});
    const auto g = j.at("grid").get<std::vector<std::size_t>>();
    if (g.size() == 3) m.grid = {g[0], g[1], g[2]};
    for (const auto& e : j.at("samples")) {
      SampleEntry s{e.at("id"), e.at("image"), e.at("mask"), e.at("image_fnv1a64"),
                    e.at("mask_fnv1a64")};
      for (const auto& [base, expected] :
           {std::pair{s.image, s.image_fnv1a64}, std::pair{s.mask, s.mask_fnv1a64}}) {
        const std::string actual = payload_hash(dir / base);
        if (actual != expected) {
          throw FormatError("'" + (dir / base).string() + "': payload hash " + actual +
                            " does not match manifest " + expected);
        }
      }
      Volume<float> image = read_volume(dir / s.image);
      LabelMask mask = read_mask(dir / s.mask);
      if (!(spatial(image.shape()) == mask.dims)) {
        throw FormatError("sample '" + s.id + "': image and mask extents differ");
      }
      out.push_back({s.id, std::move(image), std::move(mask)});
      m.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError("'" + mp.string() + "': " + e.what());
  }
  if (manifest) *manifest = std::move(m);
  return out;
}

Split make_splits(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must be in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  if (n_train < 1 || n_train >= n) {
    throw ConfigError("cannot split " + std::to_string(n) + " samples at fraction " +
                      std::to_string(train_fraction) + " into two nonempty sets");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  Split s{{idx.begin(), idx.begin() + static_cast<long>(n_train)},
          {idx.begin() + static_cast<long>(n_train), idx.end()}};
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace amber
