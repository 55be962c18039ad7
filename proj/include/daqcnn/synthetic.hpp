#pragma once

// Two-class sanity dataset: label 0 is a Gaussian blob, label 1 a thin ring.
// Centres, widths and radii are jittered and pixel noise is added, all drawn
// from one seed.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "daqcnn/image.hpp"
#include "daqcnn/rng.hpp"

namespace daqcnn {

struct SyntheticOptions {
  std::size_t count = 200;
  std::size_t size = 28;
  double noise = 0.08;  // std of additive pixel noise, in units of full scale
  std::uint64_t seed = 0;
};

inline Dataset make_blob_ring(const SyntheticOptions& opt) {
  Dataset ds;
  ds.split = Split::all;
  rng gen(opt.seed);
  const double mid = (double(opt.size) - 1) / 2;
  const double scale = double(opt.size) / 28.0;
  for (std::size_t i = 0; i < opt.count; ++i) {
    const std::uint8_t label = i % 2;
    const double cy = mid + gen.uniform(-2, 2) * scale, cx = mid + gen.uniform(-2, 2) * scale;
    const double sigma = gen.uniform(2.5, 4.0) * scale;
    const double radius = gen.uniform(6.0, 9.0) * scale, width = 1.2 * scale;
    ImageU8 img(opt.size, opt.size);
    for (std::size_t r = 0; r < opt.size; ++r)
      for (std::size_t c = 0; c < opt.size; ++c) {
        const double d = std::hypot(double(r) - cy, double(c) - cx);
        const double shape = label == 0 ? std::exp(-d * d / (2 * sigma * sigma))
                                        : std::exp(-(d - radius) * (d - radius) / (2 * width * width));
        const double v = std::clamp(shape + opt.noise * gen.normal(), 0.0, 1.0);
        img.at(r, c) = static_cast<std::uint8_t>(std::lround(255.0 * v));
      }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

}  // namespace daqcnn
