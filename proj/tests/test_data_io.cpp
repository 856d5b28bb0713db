#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <functional>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "amber/checkpoint.hpp"
#include "amber/dataset.hpp"
#include "amber/phantom.hpp"
#include "amber/volume_io.hpp"
#include "test_support.hpp"

using namespace amber;
using namespace amber::testing;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            (std::string("amber_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.dims = {4, 8, 12, 16};
  cfg.depths = {1, 1, 1, 1};
  cfg.afno_blocks = {1, 2, 2, 2};
  cfg.mhsa_heads = {1, 2, 2, 4};
  cfg.decoder_dim = 8;
  return cfg;
}

}  // namespace

TEST(Phantom, ZeroShapesGiveBackgroundAndNoise) {
  PhantomSpec spec;
  spec.classes = {ClassShapes{ShapeKind::ellipsoid, 0, 0, 2.0, 3.0}};
  spec.noise_sigma = 0.5;
  spec.seed = 3;
  const auto p = generate_phantom(spec);
  for (auto v : p.mask.labels) EXPECT_EQ(v, 0);
  double mean = 0.0, sq = 0.0;
  for (float v : p.image.data()) {
    mean += v;
    sq += double(v) * v;
  }
  mean /= double(p.image.size());
  const double sd = std::sqrt(sq / double(p.image.size()) - mean * mean);
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(sd, 0.5, 0.05);
}

TEST(Phantom, SameSeedIsBitIdentical) {
  PhantomSpec spec;
  spec.num_classes = 3;
  spec.classes = {ClassShapes{ShapeKind::box, 1, 3, 2.0, 4.0}, ClassShapes{ShapeKind::tube, 1, 2, 2.0, 5.0}};
  spec.class_mean = {0.0, 1.0, 2.0};
  spec.class_sigma = {0.0, 0.1, 0.2};
  spec.seed = 11;
  const auto a = generate_phantom(spec), b = generate_phantom(spec);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_TRUE(std::equal(a.image.data().begin(), a.image.data().end(), b.image.data().begin()));
  spec.seed = 12;
  EXPECT_NE(generate_phantom(spec).mask, a.mask);
}

TEST(Phantom, CenteredEllipsoidCardinality) {
  PhantomSpec spec;
  spec.classes = {ClassShapes{ShapeKind::ellipsoid, 0, 0, 1.0, 1.0}};
  ShapePlacement e;
  e.center = {7.5, 7.5, 7.5};
  e.radii = {4, 4, 4};
  spec.fixed = {e};
  const auto p = generate_phantom(spec);
  std::size_t expected = 0;
  for (int d = 0; d < 16; ++d)
    for (int h = 0; h < 16; ++h)
      for (int w = 0; w < 16; ++w) {
        const double x = (d - 7.5) / 4, y = (h - 7.5) / 4, z = (w - 7.5) / 4;
        expected += x * x + y * y + z * z <= 1.0;
      }
  const auto count = std::count(p.mask.labels.begin(), p.mask.labels.end(), 1);
  EXPECT_EQ(std::size_t(count), expected);
  EXPECT_EQ(rasterized_count(e, spec.grid), expected);
}

TEST(Phantom, LaterShapesWinAndLabelsStayInRange) {
  PhantomSpec spec;
  spec.num_classes = 3;
  spec.classes = {ClassShapes{ShapeKind::ellipsoid, 2, 4, 2.0, 5.0}, ClassShapes{ShapeKind::box, 1, 3, 2.0, 4.0}};
  spec.class_mean = {0, 1, 2};
  spec.class_sigma = {0, 0, 0};
  ShapePlacement big, small;
  big.kind = ShapeKind::box;
  big.label = 1;
  big.center = {8, 8, 8};
  big.radii = {6, 6, 6};
  small = big;
  small.label = 2;
  small.radii = {2, 2, 2};
  spec.fixed = {big, small};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    spec.seed = seed;
    const auto p = generate_phantom(spec);
    EXPECT_EQ(p.mask.at(8, 8, 8), 2);
    EXPECT_EQ(p.mask.at(8, 8, 13), 1);
    for (auto v : p.mask.labels) EXPECT_LT(v, 3);
    EXPECT_EQ(spatial(p.image.shape()), p.mask.dims);
  }
}

TEST(Phantom, RejectsImpossibleGeometry) {
  PhantomSpec spec;
  spec.classes = {ClassShapes{ShapeKind::ellipsoid, 1, 1, 2.0, 9.0}};
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = PhantomSpec{};
  spec.grid = {16, 16, 15};
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = PhantomSpec{};
  spec.num_classes = 1;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(VolumeIo, RandomVolumeRoundTripIsBitIdentical) {
  TempDir tmp;
  std::mt19937_64 rng(111);
  const auto x = random_volume<float>({1, 5, 3, 6, 2}, rng, -1e3, 1e3);
  write_volume(tmp.path() / "v", x, {0.5, 1.0, 2.5});
  VolumeHeader h;
  const auto y = read_volume(tmp.path() / "v", &h);
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(std::memcmp(x.data().data(), y.data().data(), x.size() * sizeof(float)), 0);
  EXPECT_EQ(h.spacing, (Spacing{0.5, 1.0, 2.5}));
  EXPECT_EQ(h.dtype, "float32");

  LabelMask m({4, 4, 2});
  for (std::size_t i = 0; i < m.size(); ++i) m.labels[i] = std::uint8_t(i % 3);
  write_mask(tmp.path() / "m", m, 3);
  EXPECT_EQ(read_mask(tmp.path() / "m", &h), m);
  EXPECT_EQ(h.num_classes, 3u);
}

TEST(VolumeIo, PayloadIsRawLittleEndian) {
  TempDir tmp;
  Volume<float> x(Shape5{1, 1, 1, 2, 1});
  x[0] = 1.0f;
  x[1] = -2.0f;
  write_volume(tmp.path() / "v", x);
  const std::string bytes = read_file(payload_path(tmp.path() / "v"));
  ASSERT_EQ(bytes.size(), 8u);
  const unsigned char expected[8] = {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  EXPECT_EQ(std::memcmp(bytes.data(), expected, 8), 0);
}

TEST(VolumeIo, HeaderPayloadMismatchNamesByteCounts) {
  TempDir tmp;
  std::mt19937_64 rng(112);
  write_volume(tmp.path() / "small", random_volume<float>({1, 15, 15, 15, 1}, rng));
  write_volume(tmp.path() / "big", random_volume<float>({1, 16, 16, 16, 1}, rng));
  fs::copy_file(payload_path(tmp.path() / "small"), payload_path(tmp.path() / "big"),
                fs::copy_options::overwrite_existing);
  const std::string msg = error_of([&] { read_volume(tmp.path() / "big"); });
  EXPECT_NE(msg.find("16384 bytes"), std::string::npos) << msg;
  EXPECT_NE(msg.find("13500"), std::string::npos) << msg;
}

TEST(VolumeIo, MalformedHeadersAreFormatErrors) {
  TempDir tmp;
  auto header_with = [&](const std::string& key, const nlohmann::json& value) {
    Volume<float> x(Shape5{1, 2, 2, 2, 1});
    write_volume(tmp.path() / "v", x);
    auto j = nlohmann::json::parse(read_file(header_path(tmp.path() / "v")));
    j[key] = value;
    write_file(header_path(tmp.path() / "v"), j.dump());
    return error_of([&] { read_volume(tmp.path() / "v"); });
  };
  EXPECT_NE(header_with("shape", {2, 0, 2}).find("empty shape"), std::string::npos);
  EXPECT_NE(header_with("dtype", "int16").find("unknown element type"), std::string::npos);
  EXPECT_NE(header_with("byte_order", "big").find("byte order"), std::string::npos);
  EXPECT_NE(header_with("shape", {2, 2}).find("3 extents"), std::string::npos);
  write_file(header_path(tmp.path() / "v"), "{ not json");
  EXPECT_FALSE(error_of([&] { read_volume(tmp.path() / "v"); }).empty());
  Volume<float> x(Shape5{1, 2, 2, 2, 1});
  write_volume(tmp.path() / "v", x);
  fs::resize_file(payload_path(tmp.path() / "v"), 31);
  EXPECT_NE(error_of([&] { read_volume(tmp.path() / "v"); }).find("payload has 31"), std::string::npos);
}

TEST(VolumeIo, EmptyShapeIsRejectedOnWrite) {
  TempDir tmp;
  EXPECT_THROW(write_volume(tmp.path() / "v", Volume<float>(Shape5{1, 0, 2, 2, 1})), FormatError);
  EXPECT_THROW(write_mask(tmp.path() / "m", LabelMask({2, 0, 2}), 2), FormatError);
  EXPECT_THROW(read_volume(tmp.path() / "missing"), IoError);
}

TEST(Splits, EightyTwentyAndSmallCase) {
  const auto s = make_splits(200, 0.8, 1);
  EXPECT_EQ(s.train.size(), 160u);
  EXPECT_EQ(s.test.size(), 40u);
  const auto t = make_splits(5, 0.8, 1);
  EXPECT_EQ(t.train.size(), 4u);
  EXPECT_EQ(t.test.size(), 1u);
}

TEST(Splits, DisjointExhaustiveAndSeeded) {
  std::mt19937_64 rng(113);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 300;
    const double f = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
    const auto s = make_splits(n, f, trial);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (auto i : s.test) EXPECT_TRUE(all.insert(i).second) << "index " << i << " in both";
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(*all.rbegin(), n - 1);
    EXPECT_EQ(make_splits(n, f, trial).test, s.test);
  }
  EXPECT_NE(make_splits(100, 0.5, 1).test, make_splits(100, 0.5, 2).test);
}

TEST(Splits, RejectsDegenerateInputs) {
  EXPECT_THROW(make_splits(1, 0.8, 0), ConfigError);
  EXPECT_THROW(make_splits(4, 0.95, 0), ConfigError);
  EXPECT_THROW(make_splits(10, 0.0, 0), ConfigError);
  EXPECT_THROW(make_splits(10, 1.0, 0), ConfigError);
}

TEST(Dataset, WriteReadRoundTripWithStableHashes) {
  TempDir tmp;
  PhantomSpec spec;
  const auto samples = generate_dataset(spec, 4, 21);
  const auto m1 = write_dataset(tmp.path() / "a", samples, 2, 21);
  const auto m2 = write_dataset(tmp.path() / "b", generate_dataset(spec, 4, 21), 2, 21);
  ASSERT_EQ(m1.samples.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(m1.samples[i].image_fnv1a64, m2.samples[i].image_fnv1a64);
    EXPECT_EQ(m1.samples[i].mask_fnv1a64, m2.samples[i].mask_fnv1a64);
  }
  EXPECT_EQ(read_file(tmp.path() / "a" / "manifest.json"), read_file(tmp.path() / "b" / "manifest.json"));
  DatasetManifest read_manifest;
  const auto back = read_dataset(tmp.path() / "a", &read_manifest);
  ASSERT_EQ(back.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back[i].id, samples[i].id);
    EXPECT_EQ(back[i].mask, samples[i].mask);
    EXPECT_TRUE(std::equal(back[i].image.data().begin(), back[i].image.data().end(),
                           samples[i].image.data().begin()));
  }
  EXPECT_EQ(read_manifest.num_classes, 2u);
}

TEST(Dataset, CorruptedPayloadFailsHash) {
  TempDir tmp;
  write_dataset(tmp.path(), generate_dataset(PhantomSpec{}, 2, 5), 2, 5);
  const fs::path raw = payload_path(tmp.path() / "sample_001_image");
  std::string bytes = read_file(raw);
  bytes[17] ^= 0x01;
  write_file(raw, bytes);
  EXPECT_NE(error_of([&] { read_dataset(tmp.path()); }).find("hash"), std::string::npos);
  EXPECT_THROW(read_dataset(tmp.path() / "missing"), IoError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir tmp;
  std::mt19937_64 rng(114);
  for (MixingKind kind : {MixingKind::afno, MixingKind::mhsa}) {
    auto cfg = tiny_config();
    cfg.mixing = kind;
    SegmentationModel<double> model(cfg, 5);
    for (auto& p : model.parameters().all())
      for (auto& v : p.value.data()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    save_checkpoint(tmp.path() / "ck", model, 42);
    CheckpointManifest manifest;
    const auto loaded = load_model<double>(tmp.path() / "ck", &manifest);
    EXPECT_EQ(manifest.step, 42);
    EXPECT_EQ(manifest.tensors.size(), model.parameters().size());
    const auto& a = model.parameters().all();
    const auto& b = loaded->parameters().all();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].name, b[i].name);
      EXPECT_EQ(a[i].shape, b[i].shape);
      EXPECT_TRUE(std::equal(a[i].value.data().begin(), a[i].value.data().end(),
                             b[i].value.data().begin()))
          << a[i].name;
    }
    const auto x = random_volume<double>({1, 16, 16, 16, 1}, rng);
    EXPECT_EQ(max_abs_diff(model.forward(x, false).logits, loaded->forward(x, false).logits), 0.0);
  }
}

TEST(Checkpoint, MismatchedModelListsShapeDifferences) {
  TempDir tmp;
  SegmentationModel<double> model(tiny_config(), 1);
  save_checkpoint(tmp.path(), model);
  auto other = tiny_config();
  other.decoder_dim = 12;
  SegmentationModel<double> wrong(other, 1);
  try {
    load_checkpoint(tmp.path(), wrong);
    FAIL() << "expected mismatch";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("decoder.fuse.weight"), std::string::npos) << msg;
  }
}

TEST(Checkpoint, TruncatedPayloadAndMissingManifest) {
  TempDir tmp;
  SegmentationModel<float> model(tiny_config(), 1);
  save_checkpoint(tmp.path(), model);
  fs::resize_file(tmp.path() / "params.bin", fs::file_size(tmp.path() / "params.bin") - 4);
  EXPECT_THROW(load_model<float>(tmp.path()), FormatError);
  EXPECT_THROW(load_model<float>(tmp.path() / "nothing"), IoError);
}
