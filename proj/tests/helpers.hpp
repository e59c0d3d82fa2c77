#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "lkp/common.hpp"
#include "lkp/image.hpp"
#include "lkp/point_cloud.hpp"

namespace lkp::test {

inline ImageU8 random_image(int w, int h, std::uint64_t seed) {
  ImageU8 img(w, h);
  Pcg32 rng(seed);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.bounded(256));
  return img;
}

inline ImageF random_imagef(int w, int h, std::uint64_t seed, float lo = 0.0f, float hi = 255.0f) {
  ImageF img(w, h);
  Pcg32 rng(seed);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform(lo, hi));
  return img;
}

// Uniform random points in a cube, valid ranges, synthetic beam indices laid
// out row-major so (ring, col) stays unique.
inline PointCloud random_cloud(std::size_t n, std::uint64_t seed, double extent = 10.0) {
  PointCloud cloud;
  cloud.reserve(n);
  Pcg32 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3f p(static_cast<float>(rng.uniform(-extent, extent)),
                            static_cast<float>(rng.uniform(-extent, extent)),
                            static_cast<float>(rng.uniform(-extent, extent)));
    cloud.push_back(p, static_cast<float>(rng.uniform(0.0, 1000.0)),
                    std::max(1e-3f, p.norm()), static_cast<std::uint16_t>(i / 2048),
                    static_cast<std::uint16_t>(i % 2048));
  }
  return cloud;
}

// A black image with a white axis-aligned square; corners are the expected
// detector maxima.
inline ImageU8 square_image(int w, int h, int x0, int y0, int side) {
  ImageU8 img(w, h, 0);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) img.at(y, x) = 255;
  return img;
}

}  // namespace lkp::test
