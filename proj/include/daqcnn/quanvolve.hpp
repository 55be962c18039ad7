#pragma once

// Sliding-window application of a digital-analog kernel over images, and the
// DQKF feature-file format that stores the resulting tensors.
//
// DQKF layout (little-endian):
//   "DQKF" | u16 version=1 | u32 num_images | u32 h_out | u32 w_out | u32 channels
//   | f32 payload[num_images * h_out * w_out * channels]  (image, row, col, channel)
//   | u8 labels[num_images]

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "daqcnn/binary_io.hpp"
#include "daqcnn/dataset_io.hpp"
#include "daqcnn/digest.hpp"
#include "daqcnn/error.hpp"
#include "daqcnn/image.hpp"
#include "daqcnn/kernel.hpp"
#include "daqcnn/parallel.hpp"
#include "json.hpp"

namespace daqcnn {

inline constexpr char feature_magic[4] = {'D', 'Q', 'K', 'F'};
inline constexpr std::uint16_t feature_version = 1;
inline constexpr std::size_t feature_header_bytes = 4 + 2 + 4 * 4;

/// phi = pi * pixel / 255.
inline std::vector<double> normalize_pixels(std::span<const std::uint8_t> patch) {
  std::vector<double> phis(patch.size());
  for (std::size_t i = 0; i < patch.size(); ++i) phis[i] = std::numbers::pi * (patch[i] / 255.0);
  return phis;
}

struct Patches {
  std::size_t side = 0;
  std::size_t h_out = 0;
  std::size_t w_out = 0;
  std::vector<std::uint8_t> values;  // count() blocks of side*side pixels, row-major within each block

  std::size_t count() const noexcept { return h_out * w_out; }
  std::span<const std::uint8_t> patch(std::size_t k) const {
    return std::span(values).subspan(k * side * side, side * side);
  }
};

inline std::pair<std::size_t, std::size_t> output_grid(std::size_t height, std::size_t width, std::size_t side,
                                                       std::size_t stride) {
  if (stride < 1) throw error(errc::config_error, "stride must be >= 1");
  if (side == 0 || side > height || side > width) throw error(errc::patch_too_large, "patch larger than image");
  return {(height - side) / stride + 1, (width - side) / stride + 1};
}

/// Patches at (y * stride, x * stride), emitted row-major over (y, x); no padding.
inline Patches extract_patches(const ImageU8& image, std::size_t side, std::size_t stride) {
  const auto [h_out, w_out] = output_grid(image.height, image.width, side, stride);
  Patches p{side, h_out, w_out, {}};
  p.values.reserve(h_out * w_out * side * side);
  for (std::size_t y = 0; y < h_out; ++y)
    for (std::size_t x = 0; x < w_out; ++x)
      for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) p.values.push_back(image.at(y * stride + r, x * stride + c));
  return p;
}

/// h_out x w_out x channels tensor, channel-minor. Channel m*n*n + i is the
/// <Z_i> readout of graph m.
struct FeatureMapTensor {
  std::size_t h_out = 0;
  std::size_t w_out = 0;
  std::size_t channels = 0;
  std::vector<float> data;
  std::string provenance;

  float at(std::size_t y, std::size_t x, std::size_t c) const { return data[(y * w_out + x) * channels + c]; }
};

inline FeatureMapTensor quanvolve_image(const ImageU8& image, const KernelSpec& spec, std::size_t stride,
                                        std::size_t workers = 1) {
  spec.validate();
  const Patches patches = extract_patches(image, spec.n, stride);
  FeatureMapTensor out{patches.h_out, patches.w_out, spec.num_outputs(),
                       std::vector<float>(patches.count() * spec.num_outputs()), kernel_digest(spec)};
  parallel_for(patches.count(), workers, [&](std::size_t k) {
    const auto values = multi_daqk_eval(normalize_pixels(patches.patch(k)), spec);
    std::copy(values.begin(), values.end(), out.data.begin() + static_cast<std::ptrdiff_t>(k * out.channels));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Feature files

struct FeatureFile {
  std::size_t num_images = 0;
  std::size_t h_out = 0;
  std::size_t w_out = 0;
  std::size_t channels = 0;
  std::vector<float> payload;
  std::vector<std::uint8_t> labels;

  std::size_t image_stride() const noexcept { return h_out * w_out * channels; }
  std::span<const float> image(std::size_t i) const { return std::span(payload).subspan(i * image_stride(), image_stride()); }
};

inline std::vector<std::uint8_t> encode_feature_file(const FeatureFile& f) {
  if (f.payload.size() != f.num_images * f.image_stride() || f.labels.size() != f.num_images)
    throw error(errc::shape_mismatch, "feature file payload or labels do not match header");
  io::Writer w(std::endian::little);
  for (char c : feature_magic) w.put(static_cast<std::uint8_t>(c));
  w.put(feature_version);
  w.put(std::uint32_t(f.num_images)).put(std::uint32_t(f.h_out)).put(std::uint32_t(f.w_out)).put(std::uint32_t(f.channels));
  for (float v : f.payload) w.put(v);
  w.put_bytes(f.labels);
  return w.take();
}

inline FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes, const std::string& what = "feature file") {
  io::Reader r(bytes, std::endian::little, what);
  for (char c : feature_magic)
    if (r.get<std::uint8_t>() != static_cast<std::uint8_t>(c)) throw error(errc::bad_magic, what);
  if (const auto version = r.get<std::uint16_t>(); version != feature_version)
    throw error(errc::bad_magic, what + ": unsupported version " + std::to_string(version));
  FeatureFile f;
  f.num_images = r.get<std::uint32_t>();
  f.h_out = r.get<std::uint32_t>();
  f.w_out = r.get<std::uint32_t>();
  f.channels = r.get<std::uint32_t>();
  f.payload.resize(f.num_images * f.image_stride());
  for (auto& v : f.payload) v = r.get<float>();
  const auto labels = r.get_bytes(f.num_images);
  f.labels.assign(labels.begin(), labels.end());
  if (r.remaining() != 0) throw error(errc::count_mismatch, what + " has trailing bytes");
  return f;
}

inline void write_feature_file(const std::filesystem::path& path, const FeatureFile& f) {
  io::write_file(path, encode_feature_file(f));
}

inline FeatureFile read_feature_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw error(errc::io_error, "feature file not found: " + path.string());
  return decode_feature_file(io::read_file(path), path.string());
}

inline std::filesystem::path manifest_path(const std::filesystem::path& features) {
  return features.string() + ".manifest.json";
}

struct QuanvolveResult {
  bool cache_hit = false;
  std::size_t num_images = 0;
  std::size_t h_out = 0;
  std::size_t w_out = 0;
  std::size_t channels = 0;
  std::string file_digest;
  nlohmann::json manifest;
};

namespace detail {

inline void check_uniform(const Dataset& ds) {
  if (ds.images.size() != ds.labels.size()) throw error(errc::count_mismatch, "images vs labels");
  if (ds.images.empty()) throw error(errc::empty_input, "dataset has no images");
  for (const auto& img : ds.images)
    if (img.height != ds.images[0].height || img.width != ds.images[0].width)
      throw error(errc::dimension_mismatch, "images must share dimensions");
  check_binary_labels(ds.labels);
}

// Reuses an existing output when its manifest matches `identity` and the file
// digest still matches the file on disk.
inline std::optional<QuanvolveResult> cached_result(const std::filesystem::path& out, const nlohmann::json& identity) {
  const auto mpath = manifest_path(out);
  if (!std::filesystem::exists(out) || !std::filesystem::exists(mpath)) return std::nullopt;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_text(mpath));
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
  for (const auto& [key, value] : identity.items())
    if (!manifest.contains(key) || manifest[key] != value) return std::nullopt;
  const auto bytes = io::read_file(out);
  const auto digest = sha256{}.update(std::as_bytes(std::span(bytes))).hex();
  if (manifest.value("file_digest", std::string()) != digest) return std::nullopt;
  const auto header = decode_feature_file(bytes, out.string());
  return QuanvolveResult{true, header.num_images, header.h_out, header.w_out, header.channels, digest, manifest};
}

inline QuanvolveResult store(const std::filesystem::path& out, const FeatureFile& f, nlohmann::json manifest) {
  const auto bytes = encode_feature_file(f);
  const auto digest = sha256{}.update(std::as_bytes(std::span(bytes))).hex();
  io::write_file(out, bytes);
  manifest["file_digest"] = digest;
  manifest["num_images"] = f.num_images;
  manifest["h_out"] = f.h_out;
  manifest["w_out"] = f.w_out;
  manifest["channels"] = f.channels;
  manifest["format"] = "DQKF";
  manifest["version"] = feature_version;
  io::write_text(manifest_path(out), manifest.dump(2) + "\n");
  return QuanvolveResult{false, f.num_images, f.h_out, f.w_out, f.channels, digest, manifest};
}

}  // namespace detail

/// Quanvolves every image and writes the DQKF file plus a JSON manifest
/// sidecar. Output is byte-identical across runs and worker counts; an
/// up-to-date output is reused without recomputation.
inline QuanvolveResult quanvolve_dataset(const Dataset& ds, const KernelSpec& spec, std::size_t stride,
                                         const std::filesystem::path& out, std::size_t workers = 0) {
  spec.validate();
  detail::check_uniform(ds);
  const nlohmann::json identity{{"mode", "daqk"},
                                {"kernel", kernel_to_json(spec)},
                                {"kernel_digest", kernel_digest(spec)},
                                {"stride", stride},
                                {"normalization", "phi = pi * pixel / 255"},
                                {"dataset_digest", dataset_digest(ds)}};
  if (auto hit = detail::cached_result(out, identity)) return *hit;

  const auto [h_out, w_out] = output_grid(ds.images[0].height, ds.images[0].width, spec.n, stride);
  FeatureFile f{ds.size(), h_out, w_out, spec.num_outputs(), {}, ds.labels};
  f.payload.resize(f.num_images * f.image_stride());

  // One job per (image, patch); each writes its own slice of the payload.
  const std::size_t per_image = h_out * w_out;
  parallel_for(ds.size() * per_image, workers, [&](std::size_t job) {
    const std::size_t img = job / per_image, k = job % per_image;
    const std::size_t y = k / w_out, x = k % w_out;
    std::vector<std::uint8_t> patch;
    patch.reserve(spec.num_qubits());
    for (std::size_t r = 0; r < spec.n; ++r)
      for (std::size_t c = 0; c < spec.n; ++c) patch.push_back(ds.images[img].at(y * stride + r, x * stride + c));
    const auto values = multi_daqk_eval(normalize_pixels(patch), spec);
    std::copy(values.begin(), values.end(), f.payload.begin() + static_cast<std::ptrdiff_t>(job * f.channels));
  });
  return detail::store(out, f, identity);
}

/// Stores the raw images (pixel / 255, one channel) in the same format, so the
/// classical baseline trains through the identical pipeline.
inline QuanvolveResult export_raw_dataset(const Dataset& ds, const std::filesystem::path& out) {
  detail::check_uniform(ds);
  const nlohmann::json identity{{"mode", "raw"},
                                {"normalization", "pixel / 255"},
                                {"dataset_digest", dataset_digest(ds)}};
  if (auto hit = detail::cached_result(out, identity)) return *hit;

  FeatureFile f{ds.size(), ds.images[0].height, ds.images[0].width, 1, {}, ds.labels};
  f.payload.reserve(f.num_images * f.image_stride());
  for (const auto& img : ds.images)
    for (auto p : img.data) f.payload.push_back(static_cast<float>(p / 255.0));
  return detail::store(out, f, identity);
}

}  // namespace daqcnn
