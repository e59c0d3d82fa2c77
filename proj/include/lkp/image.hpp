#pragma once

#include <cstdint>
#include <vector>

#include "lkp/common.hpp"

namespace lkp {

enum class Modality { Signal, Range };

inline const char* to_string(Modality m) { return m == Modality::Signal ? "signal" : "range"; }

template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;  // row-major, height*width

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  const T& at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }

  bool same_size(const Image& o) const { return width == o.width && height == o.height; }
};

using ImageF = Image<float>;
using ImageU8 = Image<std::uint8_t>;

// Panoramic LiDAR image of one modality. `pixel_to_point` maps each pixel to
// the index of the source point in the cloud it was projected from (-1 for
// no-return pixels); it is only present at native resolution and dropped by
// resize.
struct LidarImage {
  ImageF img;
  Modality modality = Modality::Signal;
  std::vector<std::int32_t> pixel_to_point;

  int width() const { return img.width; }
  int height() const { return img.height; }
  bool has_point_map() const { return !pixel_to_point.empty(); }

  std::int32_t point_at(int row, int col) const {
    return pixel_to_point[static_cast<std::size_t>(row) * img.width + col];
  }
};

// Quantize a float image to 8 bits: round half away from zero, clamp to
// [0,255]. Cubic/Lanczos resampling may overshoot; this is where it is
// clamped away.
inline ImageU8 to_u8(const ImageF& in) {
  ImageU8 out(in.width, in.height);
  for (std::size_t i = 0; i < in.data.size(); ++i) out.data[i] = quantize_u8(in.data[i]);
  return out;
}

inline ImageF to_f32(const ImageU8& in) {
  ImageF out(in.width, in.height);
  for (std::size_t i = 0; i < in.data.size(); ++i) out.data[i] = static_cast<float>(in.data[i]);
  return out;
}

// Exact 90 degree clockwise rotation; (x,y) in the source appears at
// (h-1-y, x) in the destination. Lossless pixel permutation.
inline ImageU8 rotate90_cw(const ImageU8& in) {
  ImageU8 out(in.height, in.width);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) out.at(x, in.height - 1 - y) = in.at(y, x);
  return out;
}

}  // namespace lkp
