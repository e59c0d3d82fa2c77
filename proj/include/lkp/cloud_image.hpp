#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "lkp/image.hpp"
#include "lkp/point_cloud.hpp"

namespace lkp {

// The five resampling kernels of the preprocessing sweep.
enum class InterpolationKind { Nearest, Linear, Cubic, Area, Lanczos4 };

inline const char* to_string(InterpolationKind k) {
  switch (k) {
    case InterpolationKind::Nearest: return "nearest";
    case InterpolationKind::Linear: return "linear";
    case InterpolationKind::Cubic: return "cubic";
    case InterpolationKind::Area: return "area";
    case InterpolationKind::Lanczos4: return "lanczos4";
  }
  return "?";
}

inline InterpolationKind interpolation_from_string(const std::string& s) {
  if (s == "nearest") return InterpolationKind::Nearest;
  if (s == "linear") return InterpolationKind::Linear;
  if (s == "cubic") return InterpolationKind::Cubic;
  if (s == "area") return InterpolationKind::Area;
  if (s == "lanczos4") return InterpolationKind::Lanczos4;
  fail(Err::ParseError, "unknown interpolation '" + s + "'");
}

// ---------------------------------------------------------------------------
// project: place each valid point's modality value at its (ring, col) pixel.
// No-return pixels hold 0 and map to point index -1.
inline LidarImage project(const PointCloud& cloud, Modality modality,
                          const SensorGeometry& geom = {}) {
  if (cloud.empty()) fail(Err::EmptyCloud, "cannot project an empty cloud");
  LidarImage out;
  out.modality = modality;
  out.img = ImageF(geom.width, geom.height, 0.0f);
  out.pixel_to_point.assign(static_cast<std::size_t>(geom.width) * geom.height, -1);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.range[i] <= 0.0f) continue;  // no-return entry
    const int r = cloud.ring[i];
    const int c = cloud.col[i];
    if (r >= geom.height || c >= geom.width)
      fail(Err::InvariantViolation, "beam index out of bounds at point " + std::to_string(i));
    const std::size_t px = static_cast<std::size_t>(r) * geom.width + c;
    if (out.pixel_to_point[px] != -1)
      fail(Err::DuplicateBeamIndex, "two points share (ring,col) = (" + std::to_string(r) + "," +
                                        std::to_string(c) + ")");
    out.pixel_to_point[px] = static_cast<std::int32_t>(i);
    out.img.data[px] = modality == Modality::Signal ? cloud.signal[i] : cloud.range[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// normalize_u8: clip to the [lo_pct, hi_pct] percentiles of the valid pixels,
// map affinely onto [0,255] and round. No-return pixels stay 0. A constant
// image (degenerate span) maps its valid pixels to 255.
inline LidarImage normalize_u8(const LidarImage& in, double lo_pct = 0.01, double hi_pct = 0.99) {
  if (!(lo_pct >= 0.0 && lo_pct < hi_pct && hi_pct <= 1.0))
    fail(Err::InvariantViolation, "percentiles must satisfy 0 <= lo < hi <= 1");

  const std::size_t n = in.img.data.size();
  std::vector<float> valid;
  valid.reserve(n);
  if (in.has_point_map()) {
    for (std::size_t i = 0; i < n; ++i)
      if (in.pixel_to_point[i] >= 0) valid.push_back(in.img.data[i]);
  } else {
    valid = in.img.data;
  }
  if (valid.empty()) fail(Err::AllInvalid, "image has no valid pixels");

  std::sort(valid.begin(), valid.end());
  auto quantile = [&](double p) {
    const double h = p * static_cast<double>(valid.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
    const double w = h - static_cast<double>(lo);
    return (1.0 - w) * valid[lo] + w * valid[hi];
  };
  const double lo = quantile(lo_pct);
  const double hi = quantile(hi_pct);
  const double span = hi - lo;

  LidarImage out;
  out.modality = in.modality;
  out.pixel_to_point = in.pixel_to_point;
  out.img = ImageF(in.width(), in.height(), 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    if (in.has_point_map() && in.pixel_to_point[i] < 0) continue;
    if (span <= 0.0) {
      out.img.data[i] = 255.0f;
      continue;
    }
    double v = std::clamp(static_cast<double>(in.img.data[i]), lo, hi);
    out.img.data[i] = static_cast<float>(quantize_u8((v - lo) / span * 255.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Separable resampling. Sample positions use the pixel-center convention
// src = (dst + 0.5)*scale - 0.5; all kernels clamp to the edge. Tap weights
// are normalized so constant images stay constant.
namespace detail {

struct Tap {
  int first = 0;          // first source index (clamped later)
  float weights[8] = {};  // up to 8 taps (Lanczos4)
  int count = 0;
};

inline float cubic_catmull_rom(float t) {
  // a = -0.5
  t = std::abs(t);
  if (t <= 1.0f) return ((1.5f * t - 2.5f) * t) * t + 1.0f;
  if (t < 2.0f) return (((-0.5f * t) + 2.5f) * t - 4.0f) * t + 2.0f;
  return 0.0f;
}

inline float lanczos4(float t) {
  if (t == 0.0f) return 1.0f;
  if (std::abs(t) >= 4.0f) return 0.0f;
  const float pt = 3.14159265358979323846f * t;
  return 4.0f * std::sin(pt) * std::sin(pt / 4.0f) / (pt * pt);
}

inline std::vector<Tap> make_taps(int src, int dst, InterpolationKind kind) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int o = 0; o < dst; ++o) {
    Tap& tap = taps[static_cast<std::size_t>(o)];
    const double center = (o + 0.5) * scale - 0.5;
    switch (kind) {
      case InterpolationKind::Nearest: {
        int j = static_cast<int>(std::floor((o + 0.5) * scale));
        tap.first = std::clamp(j, 0, src - 1);
        tap.weights[0] = 1.0f;
        tap.count = 1;
        break;
      }
      case InterpolationKind::Linear: {
        const int j0 = static_cast<int>(std::floor(center));
        const float w1 = static_cast<float>(center - j0);
        tap.first = j0;
        tap.weights[0] = 1.0f - w1;
        tap.weights[1] = w1;
        tap.count = 2;
        break;
      }
      case InterpolationKind::Cubic: {
        const int j0 = static_cast<int>(std::floor(center)) - 1;
        tap.first = j0;
        tap.count = 4;
        float sum = 0.0f;
        for (int k = 0; k < 4; ++k) {
          tap.weights[k] = cubic_catmull_rom(static_cast<float>(center - (j0 + k)));
          sum += tap.weights[k];
        }
        for (int k = 0; k < 4; ++k) tap.weights[k] /= sum;
        break;
      }
      case InterpolationKind::Lanczos4: {
        const int j0 = static_cast<int>(std::floor(center)) - 3;
        tap.first = j0;
        tap.count = 8;
        float sum = 0.0f;
        for (int k = 0; k < 8; ++k) {
          tap.weights[k] = lanczos4(static_cast<float>(center - (j0 + k)));
          sum += tap.weights[k];
        }
        for (int k = 0; k < 8; ++k) tap.weights[k] /= sum;
        break;
      }
      case InterpolationKind::Area: {
        // Exact coverage of the destination footprint [o*scale, (o+1)*scale).
        const double lo = o * scale;
        const double hi = (o + 1) * scale;
        int j0 = static_cast<int>(std::floor(lo));
        int j1 = static_cast<int>(std::ceil(hi)) - 1;
        j0 = std::clamp(j0, 0, src - 1);
        j1 = std::clamp(j1, j0, src - 1);
        tap.first = j0;
        tap.count = j1 - j0 + 1;
        float sum = 0.0f;
        for (int j = j0; j <= j1; ++j) {
          const double overlap =
              std::min(hi, static_cast<double>(j + 1)) - std::max(lo, static_cast<double>(j));
          tap.weights[j - j0] = static_cast<float>(std::max(overlap, 0.0));
          sum += tap.weights[j - j0];
        }
        for (int k = 0; k < tap.count; ++k) tap.weights[k] /= sum;
        break;
      }
    }
  }
  return taps;
}

// An Area footprint of length L overlaps up to ceil(L)+1 source pixels, so
// factors above 7 do not fit the fixed 8-tap table; resolve those directly.
inline bool area_needs_slow_path(int src, int dst) {
  return static_cast<double>(src) / dst > 6.5;
}

inline void resample_axis_slow_area(const float* in, float* out, int src, int dst, int stride_in,
                                    int stride_out, int lines, int line_stride_in,
                                    int line_stride_out) {
  const double scale = static_cast<double>(src) / dst;
  for (int line = 0; line < lines; ++line) {
    const float* src_line = in + static_cast<std::size_t>(line) * line_stride_in;
    float* dst_line = out + static_cast<std::size_t>(line) * line_stride_out;
    for (int o = 0; o < dst; ++o) {
      const double lo = o * scale;
      const double hi = (o + 1) * scale;
      int j0 = std::clamp(static_cast<int>(std::floor(lo)), 0, src - 1);
      int j1 = std::clamp(static_cast<int>(std::ceil(hi)) - 1, j0, src - 1);
      double acc = 0.0, wsum = 0.0;
      for (int j = j0; j <= j1; ++j) {
        const double w =
            std::min(hi, static_cast<double>(j + 1)) - std::max(lo, static_cast<double>(j));
        acc += w * src_line[static_cast<std::size_t>(j) * stride_in];
        wsum += w;
      }
      dst_line[static_cast<std::size_t>(o) * stride_out] = static_cast<float>(acc / wsum);
    }
  }
}

}  // namespace detail

inline ImageF resize(const ImageF& in, int w, int h, InterpolationKind kind) {
  if (w < 1 || h < 1) fail(Err::InvariantViolation, "resize target must be >= 1x1");
  if (w == in.width && h == in.height && kind == InterpolationKind::Nearest) return in;

  // Horizontal pass.
  ImageF mid(w, in.height);
  if (kind == InterpolationKind::Area && detail::area_needs_slow_path(in.width, w)) {
    detail::resample_axis_slow_area(in.data.data(), mid.data.data(), in.width, w, 1, 1, in.height,
                                    in.width, w);
  } else {
    const auto taps = detail::make_taps(in.width, w, kind);
    for (int y = 0; y < in.height; ++y) {
      const float* row = &in.data[static_cast<std::size_t>(y) * in.width];
      float* out_row = &mid.data[static_cast<std::size_t>(y) * w];
      for (int x = 0; x < w; ++x) {
        const detail::Tap& t = taps[static_cast<std::size_t>(x)];
        float acc = 0.0f;
        for (int k = 0; k < t.count; ++k) {
          const int j = std::clamp(t.first + k, 0, in.width - 1);
          acc += t.weights[k] * row[j];
        }
        out_row[x] = acc;
      }
    }
  }

  // Vertical pass.
  ImageF out(w, h);
  if (kind == InterpolationKind::Area && detail::area_needs_slow_path(in.height, h)) {
    detail::resample_axis_slow_area(mid.data.data(), out.data.data(), in.height, h, w, w, w, 1, 1);
  } else {
    const auto taps = detail::make_taps(in.height, h, kind);
    for (int y = 0; y < h; ++y) {
      const detail::Tap& t = taps[static_cast<std::size_t>(y)];
      float* out_row = &out.data[static_cast<std::size_t>(y) * w];
      const float* base = mid.data.data();
      for (int x = 0; x < w; ++x) {
        float acc = 0.0f;
        for (int k = 0; k < t.count; ++k) {
          const int j = std::clamp(t.first + k, 0, in.height - 1);
          acc += t.weights[k] * base[static_cast<std::size_t>(j) * w + x];
        }
        out_row[x] = acc;
      }
    }
  }
  return out;
}

// Resize a LidarImage; the pixel-to-point map does not survive resampling
// (coordinates are recovered through scale_coords_to_native instead).
inline LidarImage resize(const LidarImage& in, int w, int h, InterpolationKind kind) {
  LidarImage out;
  out.modality = in.modality;
  out.img = resize(in.img, w, h, kind);
  return out;
}

struct Extent {
  int width = 0;
  int height = 0;
};

// Map a keypoint position between image resolutions by axis ratio, clamped
// to the valid pixel range of the target.
inline std::pair<double, double> scale_coords_to_native(double x, double y, Extent from,
                                                        Extent to) {
  double nx = x * static_cast<double>(to.width) / from.width;
  double ny = y * static_cast<double>(to.height) / from.height;
  nx = std::clamp(nx, 0.0, static_cast<double>(to.width - 1));
  ny = std::clamp(ny, 0.0, static_cast<double>(to.height - 1));
  return {nx, ny};
}

// The standard preprocessing chain: percentile-normalize at native
// resolution, resample to the detection size, quantize to 8 bits.
inline ImageU8 preprocess_for_detection(const LidarImage& native, int w, int h,
                                        InterpolationKind kind, double lo_pct = 0.01,
                                        double hi_pct = 0.99) {
  LidarImage norm = normalize_u8(native, lo_pct, hi_pct);
  return to_u8(resize(norm.img, w, h, kind));
}

}  // namespace lkp
