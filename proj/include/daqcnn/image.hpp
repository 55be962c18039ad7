#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "daqcnn/error.hpp"

namespace daqcnn {

/// 8-bit grayscale image, row-major.
struct ImageU8 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;

  ImageU8() = default;
  ImageU8(std::size_t h, std::size_t w, std::vector<std::uint8_t> pixels)
      : height(h), width(w), data(std::move(pixels)) {
    if (data.size() != h * w) throw error(errc::size_error, "pixel count differs from height * width");
  }
  ImageU8(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), data(h * w, fill) {}

  std::uint8_t at(std::size_t row, std::size_t col) const { return data[row * width + col]; }
  std::uint8_t& at(std::size_t row, std::size_t col) { return data[row * width + col]; }

  friend bool operator==(const ImageU8&, const ImageU8&) = default;
};

enum class Split { train, val, test, all };

/// Labeled grayscale images. Dimensions are checked where they matter
/// (quanvolution), not at load time.
struct Dataset {
  std::vector<ImageU8> images;
  std::vector<std::uint8_t> labels;
  Split split = Split::all;

  std::size_t size() const noexcept { return images.size(); }
};

}  // namespace daqcnn
