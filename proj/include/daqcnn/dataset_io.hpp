#pragma once

// Dataset ingestion: IDX files (big-endian, MNIST layout) and a directory of
// grayscale PNGs listed in a "filename,label" CSV.

#include <png.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "daqcnn/binary_io.hpp"
#include "daqcnn/digest.hpp"
#include "daqcnn/error.hpp"
#include "daqcnn/image.hpp"

namespace daqcnn {

inline constexpr std::uint32_t idx_images_magic = 0x00000803;
inline constexpr std::uint32_t idx_labels_magic = 0x00000801;

inline void check_binary_labels(std::span<const std::uint8_t> labels) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 1) throw error(errc::bad_label, "label " + std::to_string(labels[i]) + " at index " + std::to_string(i));
}

inline Dataset read_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto image_bytes = io::read_file(images_path);
  const auto label_bytes = io::read_file(labels_path);

  io::Reader images(image_bytes, std::endian::big, images_path.string());
  if (images.get<std::uint32_t>() != idx_images_magic) throw error(errc::bad_magic, images_path.string());
  const std::uint32_t count = images.get<std::uint32_t>();
  const std::uint32_t rows = images.get<std::uint32_t>();
  const std::uint32_t cols = images.get<std::uint32_t>();

  io::Reader labels(label_bytes, std::endian::big, labels_path.string());
  if (labels.get<std::uint32_t>() != idx_labels_magic) throw error(errc::bad_magic, labels_path.string());
  const std::uint32_t label_count = labels.get<std::uint32_t>();
  if (label_count != count)
    throw error(errc::count_mismatch, std::to_string(count) + " images vs " + std::to_string(label_count) + " labels");

  Dataset ds;
  ds.images.reserve(count);
  const std::size_t pixels = std::size_t{rows} * cols;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto raw = images.get_bytes(pixels);
    ds.images.emplace_back(rows, cols, std::vector<std::uint8_t>(raw.begin(), raw.end()));
  }
  const auto raw_labels = labels.get_bytes(count);
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  check_binary_labels(ds.labels);
  return ds;
}

/// Writes the pair of IDX files read by read_idx. All images must share dimensions.
inline void write_idx(const Dataset& ds, const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path) {
  if (ds.images.size() != ds.labels.size()) throw error(errc::count_mismatch, "images vs labels");
  const std::size_t rows = ds.images.empty() ? 0 : ds.images[0].height;
  const std::size_t cols = ds.images.empty() ? 0 : ds.images[0].width;
  io::Writer images(std::endian::big);
  images.put(idx_images_magic).put(std::uint32_t(ds.size())).put(std::uint32_t(rows)).put(std::uint32_t(cols));
  for (const auto& img : ds.images) {
    if (img.height != rows || img.width != cols) throw error(errc::dimension_mismatch, "IDX needs uniform dimensions");
    images.put_bytes(img.data);
  }
  io::Writer labels(std::endian::big);
  labels.put(idx_labels_magic).put(std::uint32_t(ds.size())).put_bytes(ds.labels);
  io::write_file(images_path, images.bytes());
  io::write_file(labels_path, labels.bytes());
}

// ---------------------------------------------------------------------------
// PNG

inline ImageU8 read_png_gray(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw error(errc::missing_file, path.string());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw error(errc::io_error, path.string() + ": " + image.message);
  if (image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA | PNG_FORMAT_FLAG_LINEAR)) {
    png_image_free(&image);
    throw error(errc::non_grayscale, path.string() + " is not 8-bit grayscale");
  }
  image.format = PNG_FORMAT_GRAY;
  ImageU8 out(image.height, image.width);
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw error(errc::io_error, path.string() + ": " + msg);
  }
  return out;
}

inline void write_png_gray(const ImageU8& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.data.data(), 0, nullptr))
    throw error(errc::io_error, path.string() + ": " + image.message);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Images in CSV row order. Non-uniform dimensions are accepted here and
/// rejected by quanvolution.
inline Dataset read_png_csv(const std::filesystem::path& dir, const std::filesystem::path& csv_path) {
  std::ifstream csv(csv_path);
  if (!csv) throw error(errc::missing_file, csv_path.string());
  std::string line;
  if (!std::getline(csv, line) || detail::trim(line) != "filename,label")
    throw error(errc::io_error, csv_path.string() + ": expected header 'filename,label'");

  Dataset ds;
  std::size_t row = 1;
  while (std::getline(csv, line)) {
    ++row;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    const auto comma = text.rfind(',');
    if (comma == std::string_view::npos) throw error(errc::io_error, "CSV row " + std::to_string(row) + " has no label");
    const auto name = detail::trim(text.substr(0, comma));
    const auto label = detail::trim(text.substr(comma + 1));
    if (label != "0" && label != "1")
      throw error(errc::bad_label, "CSV row " + std::to_string(row) + ": '" + std::string(label) + "'");
    ds.images.push_back(read_png_gray(dir / std::string(name)));
    ds.labels.push_back(label == "1" ? 1 : 0);
  }
  return ds;
}

/// Content digest over dimensions, pixels and labels.
inline std::string dataset_digest(const Dataset& ds) {
  sha256 h;
  h.update_pod(std::uint64_t(ds.size()));
  for (const auto& img : ds.images) {
    h.update_pod(std::uint64_t(img.height)).update_pod(std::uint64_t(img.width));
    h.update(std::as_bytes(std::span(img.data)));
  }
  h.update(std::as_bytes(std::span(ds.labels)));
  return h.hex();
}

}  // namespace daqcnn
