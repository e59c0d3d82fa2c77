#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lkp/homography.hpp"
#include "lkp/matching.hpp"

namespace lkp {

// One detector x descriptor x preprocessing evaluation row for a single
// frame. runtime_ms is populated only when timing is enabled (wall-clock
// output would break byte-identical reruns otherwise).
struct MetricsRecord {
  int n_keypoints = 0;
  double runtime_ms = 0.0;
  double robustness_rotation = 0.0;
  double robustness_scale = 0.0;
  double robustness_noise = 0.0;
  double match_ratio = 0.0;
  double match_score = 0.0;
  double distinctiveness = 0.0;
};

enum class RobustnessTransform { Rotation, Scale, Noise };

struct RobustnessParams {
  double tol_px = 2.0;
  double scale_factor = 1.25;
  double noise_sigma = 10.0;
  std::uint64_t noise_seed = 1;
};

namespace detail {

// Fraction of reference keypoints with a transformed-image keypoint within
// tol after mapping back. Bucketed by cells of tol to avoid the quadratic
// scan.
inline double matched_fraction(const std::vector<Keypoint>& k0,
                               const std::vector<std::pair<double, double>>& mapped,
                               double tol) {
  if (k0.empty()) return 0.0;
  const double t2 = tol * tol;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
  auto key = [tol](double x, double y) {
    const auto cx = static_cast<std::int64_t>(std::floor(x / tol));
    const auto cy = static_cast<std::int64_t>(std::floor(y / tol));
    return (cx << 32) ^ (cy & 0xffffffffLL);
  };
  for (std::size_t i = 0; i < mapped.size(); ++i)
    grid[key(mapped[i].first, mapped[i].second)].push_back(i);

  std::size_t hit = 0;
  for (const Keypoint& kp : k0) {
    const auto cx = static_cast<std::int64_t>(std::floor(kp.x / tol));
    const auto cy = static_cast<std::int64_t>(std::floor(kp.y / tol));
    bool found = false;
    for (std::int64_t dy = -1; dy <= 1 && !found; ++dy) {
      for (std::int64_t dx = -1; dx <= 1 && !found; ++dx) {
        auto it = grid.find(((cx + dx) << 32) ^ ((cy + dy) & 0xffffffffLL));
        if (it == grid.end()) continue;
        for (std::size_t mi : it->second) {
          const double ddx = mapped[mi].first - kp.x;
          const double ddy = mapped[mi].second - kp.y;
          if (ddx * ddx + ddy * ddy <= t2) {
            found = true;
            break;
          }
        }
      }
    }
    if (found) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(k0.size());
}

inline ImageU8 add_gaussian_noise(const ImageU8& img, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return img;
  ImageU8 out(img.width, img.height);
  Pcg32 rng(seed);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = quantize_u8(static_cast<double>(img.data[i]) + rng.normal() * sigma);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Detector robustness under a transform: detect K0 on the original, detect
// K1 on the transformed image, map K1 back through the exact inverse and
// count the fraction of K0 recovered within tol_px.
//
// Transforms: rotation is a lossless 90-degree grid rotation, scale is a
// 1.25x bilinear upscale, noise is additive Gaussian on the 8-bit values.
inline double robustness(const ImageU8& img, DetectorKind det, RobustnessTransform transform,
                         const DetectorParams& dp = {}, const RobustnessParams& rp = {}) {
  const std::vector<Keypoint> k0 = detect(img, det, dp);
  if (k0.empty()) return 0.0;

  std::vector<Keypoint> k1;
  std::vector<std::pair<double, double>> mapped;
  switch (transform) {
    case RobustnessTransform::Rotation: {
      k1 = detect(rotate90_cw(img), det, dp);
      mapped.reserve(k1.size());
      for (const Keypoint& kp : k1)
        mapped.emplace_back(kp.y, static_cast<double>(img.height - 1) - kp.x);
      break;
    }
    case RobustnessTransform::Scale: {
      const int w = static_cast<int>(std::lround(img.width * rp.scale_factor));
      const int h = static_cast<int>(std::lround(img.height * rp.scale_factor));
      k1 = detect(to_u8(resize(to_f32(img), w, h, InterpolationKind::Linear)), det, dp);
      const double sx = static_cast<double>(img.width) / w;
      const double sy = static_cast<double>(img.height) / h;
      mapped.reserve(k1.size());
      for (const Keypoint& kp : k1) mapped.emplace_back(kp.x * sx, kp.y * sy);
      break;
    }
    case RobustnessTransform::Noise: {
      k1 = detect(detail::add_gaussian_noise(img, rp.noise_sigma, rp.noise_seed), det, dp);
      mapped.reserve(k1.size());
      for (const Keypoint& kp : k1) mapped.emplace_back(kp.x, kp.y);
      break;
    }
  }
  return detail::matched_fraction(k0, mapped, rp.tol_px);
}

// ---------------------------------------------------------------------------
// Per-frame evaluation shared by the sweep drivers. Detection artifacts for
// the previous frame are carried by the caller so each frame is detected
// once.
struct FrameFeatures {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;
  std::vector<Keypoint> described_keypoints;  // aligned with descriptors
};

inline FrameFeatures extract_features(const ImageU8& img, DetectorKind det, DescriptorKind desc,
                                      const DetectorParams& dp) {
  FrameFeatures f;
  f.keypoints = detect(img, det, dp);
  f.descriptors = describe(img, f.keypoints, desc);
  f.described_keypoints.reserve(f.descriptors.size());
  for (const Descriptor& d : f.descriptors)
    f.described_keypoints.push_back(f.keypoints[static_cast<std::size_t>(d.keypoint_index)]);
  return f;
}

struct PairMetricsOptions {
  DetectorParams detector;
  RansacParams ransac;
  RobustnessParams robustness;
  double lowe_ratio = 0.8;
  bool timing = false;
};

// Metrics of `cur` matched against `prev` (Match Ratio denominator: the
// current frame's keypoint count). Robustness values are computed by the
// caller, which can share them across descriptor kinds.
inline MetricsRecord pair_metrics(const FrameFeatures& cur, const FrameFeatures& prev,
                                  const PairMetricsOptions& opt) {
  MetricsRecord rec;
  rec.n_keypoints = static_cast<int>(cur.keypoints.size());
  const auto matches = match_crosscheck(cur.descriptors, prev.descriptors);
  rec.match_ratio = match_ratio(matches.size(), cur.keypoints.size());
  rec.match_score =
      match_score(matches, cur.described_keypoints, prev.described_keypoints, opt.ransac);
  rec.distinctiveness = distinctiveness(cur.descriptors, prev.descriptors, opt.lowe_ratio);
  return rec;
}

}  // namespace lkp
