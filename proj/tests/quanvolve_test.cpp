#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "daqcnn/binary_io.hpp"
#include "daqcnn/quanvolve.hpp"
#include "daqcnn/rng.hpp"

namespace {

using namespace daqcnn;
namespace fs = std::filesystem;
constexpr double pi = std::numbers::pi;

template <typename Fn>
void expect_error(errc code, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

ImageU8 random_image(rng& gen, std::size_t h, std::size_t w) {
  ImageU8 img(h, w);
  for (auto& p : img.data) p = std::uint8_t(gen.below(256));
  return img;
}

class QuanvolveFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("daqcnn_qv_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST(NormalizePixels, Endpoints) {
  const std::vector<std::uint8_t> px = {0, 255, 128};
  const auto phi = normalize_pixels(px);
  EXPECT_EQ(phi[0], 0.0);
  EXPECT_EQ(phi[1], pi);
  EXPECT_NEAR(phi[2], 128 * pi / 255, 1e-15);
  EXPECT_NEAR(phi[2], 1.576956, 1e-6);
}

TEST(ExtractPatches, Shapes) {
  const ImageU8 img28(28, 28);
  auto p = extract_patches(img28, 2, 2);
  EXPECT_EQ(p.h_out, 14u);
  EXPECT_EQ(p.w_out, 14u);
  EXPECT_EQ(p.count(), 196u);
  p = extract_patches(img28, 3, 3);
  EXPECT_EQ(p.h_out, 9u);
  EXPECT_EQ(p.count(), 81u);
  p = extract_patches(ImageU8(4, 4), 2, 1);
  EXPECT_EQ(p.h_out, 3u);
  EXPECT_EQ(p.count(), 9u);
  expect_error(errc::patch_too_large, [] { extract_patches(ImageU8(2, 5), 3, 1); });
  expect_error(errc::config_error, [] { extract_patches(ImageU8(4, 4), 2, 0); });
}

TEST(ExtractPatches, RowMajorContents) {
  ImageU8 img(4, 5);
  for (std::size_t k = 0; k < img.data.size(); ++k) img.data[k] = std::uint8_t(k);
  const auto p = extract_patches(img, 2, 2);
  ASSERT_EQ(p.h_out, 2u);
  ASSERT_EQ(p.w_out, 2u);
  const auto second = p.patch(1);  // (y=0, x=1) starts at column 2
  EXPECT_EQ(std::vector<std::uint8_t>(second.begin(), second.end()), (std::vector<std::uint8_t>{2, 3, 7, 8}));
  const auto third = p.patch(2);
  EXPECT_EQ(std::vector<std::uint8_t>(third.begin(), third.end()), (std::vector<std::uint8_t>{10, 11, 15, 16}));
}

TEST(QuanvolveImage, ConstantImagesAtZeroTime) {
  auto spec = make_kernel_spec(2, {"kings"});
  spec.tau = 0.0;
  const auto zero = quanvolve_image(ImageU8(6, 6, 0), spec, 2);
  for (float v : zero.data) EXPECT_NEAR(v, 0.0f, 1e-7f);
  const auto mid = quanvolve_image(ImageU8(6, 6, 128), spec, 2);
  const float expected = float(std::sin(128 * pi / 255));
  EXPECT_NEAR(expected, 0.99998f, 1e-5f);
  for (float v : mid.data) EXPECT_EQ(v, expected);
}

TEST(QuanvolveImage, ShapeAndChannelOrder) {
  const auto spec = make_kernel_spec(2, {"kings", "grid4", "diag", "ring"});
  rng gen(4);
  const auto img = random_image(gen, 28, 28);
  const auto t = quanvolve_image(img, spec, 2);
  EXPECT_EQ(t.h_out, 14u);
  EXPECT_EQ(t.w_out, 14u);
  EXPECT_EQ(t.channels, 16u);
  EXPECT_EQ(t.data.size(), 14u * 14 * 16);
  const auto patches = extract_patches(img, 2, 2);
  const std::size_t k = 5 * 14 + 9;
  const auto expected = multi_daqk_eval(normalize_pixels(patches.patch(k)), spec);
  for (std::size_t c = 0; c < 16; ++c) EXPECT_EQ(t.at(5, 9, c), float(expected[c]));
  for (float v : t.data) {
    EXPECT_GE(v, -1.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(QuanvolveImage, ParallelMatchesSequential) {
  const auto spec = make_kernel_spec(3, {"kings", "ring"});
  rng gen(6);
  const auto img = random_image(gen, 12, 12);
  const auto a = quanvolve_image(img, spec, 1, 1);
  const auto b = quanvolve_image(img, spec, 1, 4);
  EXPECT_EQ(a.data, b.data);
}

TEST_F(QuanvolveFiles, FeatureFileRoundTripIsBitExact) {
  rng gen(1);
  FeatureFile f{3, 2, 5, 7, {}, {1, 0, 1}};
  for (std::size_t i = 0; i < 3 * 2 * 5 * 7; ++i) f.payload.push_back(float(gen.uniform(-1, 1)));
  write_feature_file(dir_ / "f.dqkf", f);
  const auto back = read_feature_file(dir_ / "f.dqkf");
  EXPECT_EQ(back.num_images, 3u);
  EXPECT_EQ(back.channels, 7u);
  ASSERT_EQ(back.payload.size(), f.payload.size());
  EXPECT_EQ(std::memcmp(back.payload.data(), f.payload.data(), f.payload.size() * sizeof(float)), 0);
  EXPECT_EQ(back.labels, f.labels);
}

TEST_F(QuanvolveFiles, FeatureFileHeaderLayout) {
  FeatureFile f{1, 1, 1, 1, {0.5f}, {1}};
  const auto bytes = encode_feature_file(f);
  ASSERT_EQ(bytes.size(), feature_header_bytes + 4 + 1);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "DQKF");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian u16
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 1);  // num_images
  // 0.5f = 0x3f000000, little-endian
  EXPECT_EQ(bytes[22], 0x00);
  EXPECT_EQ(bytes[25], 0x3f);
  EXPECT_EQ(bytes[26], 1);

  auto bad = bytes;
  bad[0] = 'X';
  expect_error(errc::bad_magic, [&] { decode_feature_file(bad); });
  expect_error(errc::truncated_file,
               [&] { decode_feature_file(std::span(bytes).first(bytes.size() - 1)); });
}

TEST_F(QuanvolveFiles, DatasetFileSizeAndDeterminism) {
  rng gen(2);
  Dataset ds;
  for (int i = 0; i < 200; ++i) {
    ds.images.push_back(random_image(gen, 28, 28));
    ds.labels.push_back(i % 2);
  }
  const auto spec = make_kernel_spec(2, {"kings"});
  const auto r = quanvolve_dataset(ds, spec, 2, dir_ / "a.dqkf", 1);
  EXPECT_FALSE(r.cache_hit);
  EXPECT_EQ(fs::file_size(dir_ / "a.dqkf"), feature_header_bytes + 627200u + 200u);

  const auto f = read_feature_file(dir_ / "a.dqkf");
  EXPECT_EQ(f.h_out, 14u);
  EXPECT_EQ(f.channels, 4u);
  EXPECT_EQ(f.labels, ds.labels);
  for (float v : f.payload) {
    EXPECT_GE(v, -1.0f);
    EXPECT_LE(v, 1.0f);
  }
  // Payload of image 7 equals the single-image quanvolution.
  const auto t = quanvolve_image(ds.images[7], spec, 2);
  const auto slice = f.image(7);
  EXPECT_TRUE(std::equal(slice.begin(), slice.end(), t.data.begin()));

  // Different worker count, fresh path: identical bytes.
  quanvolve_dataset(ds, spec, 2, dir_ / "b.dqkf", 3);
  EXPECT_EQ(io::read_file(dir_ / "a.dqkf"), io::read_file(dir_ / "b.dqkf"));
}

TEST_F(QuanvolveFiles, IdenticalImagesGiveIdenticalBlocks) {
  rng gen(3);
  const auto img = random_image(gen, 6, 6);
  Dataset ds{{img, img, img}, {0, 1, 0}};
  quanvolve_dataset(ds, make_kernel_spec(2, {"kings", "diag"}), 2, dir_ / "f.dqkf", 2);
  const auto f = read_feature_file(dir_ / "f.dqkf");
  for (std::size_t i = 1; i < 3; ++i) {
    const auto a = f.image(0), b = f.image(i);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST_F(QuanvolveFiles, CacheHitAndInvalidation) {
  rng gen(5);
  Dataset ds{{random_image(gen, 8, 8), random_image(gen, 8, 8)}, {0, 1}};
  const auto spec = make_kernel_spec(2, {"kings"});
  const auto out = dir_ / "f.dqkf";
  const auto first = quanvolve_dataset(ds, spec, 2, out);
  const auto bytes = io::read_file(out);
  const auto manifest = io::read_text(manifest_path(out));

  const auto again = quanvolve_dataset(ds, spec, 2, out);
  EXPECT_TRUE(again.cache_hit);
  EXPECT_EQ(again.file_digest, first.file_digest);
  EXPECT_EQ(io::read_file(out), bytes);
  EXPECT_EQ(io::read_text(manifest_path(out)), manifest);

  // Any identity change forces recomputation.
  EXPECT_FALSE(quanvolve_dataset(ds, spec, 1, out).cache_hit);
  EXPECT_FALSE(quanvolve_dataset(ds, make_kernel_spec(2, {"grid4"}), 1, out).cache_hit);
  ds.images[1].data[0] ^= 1;
  EXPECT_FALSE(quanvolve_dataset(ds, make_kernel_spec(2, {"grid4"}), 1, out).cache_hit);

  // A tampered feature file is not trusted.
  auto tampered = io::read_file(out);
  tampered[30] ^= 0xff;
  io::write_file(out, tampered);
  EXPECT_FALSE(quanvolve_dataset(ds, make_kernel_spec(2, {"grid4"}), 1, out).cache_hit);
}

TEST_F(QuanvolveFiles, DimensionMismatch) {
  Dataset ds{{ImageU8(8, 8), ImageU8(8, 9)}, {0, 1}};
  expect_error(errc::dimension_mismatch, [&] { quanvolve_dataset(ds, make_kernel_spec(2, {"kings"}), 2, dir_ / "f"); });
}

TEST_F(QuanvolveFiles, RawExport) {
  Dataset ds{{ImageU8(3, 3, 255), ImageU8(3, 3, 51)}, {1, 0}};
  const auto r = export_raw_dataset(ds, dir_ / "raw.dqkf");
  EXPECT_EQ(r.channels, 1u);
  const auto f = read_feature_file(dir_ / "raw.dqkf");
  EXPECT_EQ(f.h_out, 3u);
  EXPECT_EQ(f.payload[0], 1.0f);
  EXPECT_EQ(f.payload[9], float(51 / 255.0));
  EXPECT_TRUE(export_raw_dataset(ds, dir_ / "raw.dqkf").cache_hit);
}

}  // namespace
