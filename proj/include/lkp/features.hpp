#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "lkp/cloud_image.hpp"
#include "lkp/image.hpp"

namespace lkp {

struct Keypoint {
  float x = 0.0f;      // subpixel column at detection resolution
  float y = 0.0f;      // subpixel row
  float response = 0.0f;
  float angle = 0.0f;  // radians; 0 for orientation-free detectors
  int octave = 0;
};

// 256-bit binary descriptor, stored as four 64-bit words for fast Hamming
// distances. keypoint_index points back into the detector output (describe
// drops keypoints too close to the border, so its output can be shorter).
struct Descriptor {
  std::array<std::uint64_t, 4> bits{};
  std::int32_t keypoint_index = -1;

  void set_bit(int i) { bits[static_cast<std::size_t>(i >> 6)] |= (1ULL << (i & 63)); }
  bool get_bit(int i) const { return (bits[static_cast<std::size_t>(i >> 6)] >> (i & 63)) & 1ULL; }
};

inline int hamming_distance(const Descriptor& a, const Descriptor& b) {
  int d = 0;
  for (std::size_t i = 0; i < 4; ++i) d += __builtin_popcountll(a.bits[i] ^ b.bits[i]);
  return d;
}

enum class DetectorKind { Harris, ShiTomasi, Fast, OrientedFast };
enum class DescriptorKind { Brief, RotatedBrief };

inline const char* to_string(DetectorKind k) {
  switch (k) {
    case DetectorKind::Harris: return "harris";
    case DetectorKind::ShiTomasi: return "shitomasi";
    case DetectorKind::Fast: return "fast";
    case DetectorKind::OrientedFast: return "ofast";
  }
  return "?";
}

inline const char* to_string(DescriptorKind k) {
  return k == DescriptorKind::Brief ? "brief" : "rbrief";
}

inline DetectorKind detector_from_string(const std::string& s) {
  if (s == "harris") return DetectorKind::Harris;
  if (s == "shitomasi") return DetectorKind::ShiTomasi;
  if (s == "fast") return DetectorKind::Fast;
  if (s == "ofast") return DetectorKind::OrientedFast;
  fail(Err::ParseError, "unknown detector '" + s + "'");
}

inline DescriptorKind descriptor_from_string(const std::string& s) {
  if (s == "brief") return DescriptorKind::Brief;
  if (s == "rbrief") return DescriptorKind::RotatedBrief;
  fail(Err::ParseError, "unknown descriptor '" + s + "'");
}

struct DetectorParams {
  int max_keypoints = 1000;
  double nms_radius = 4.0;
  // Harris / Shi-Tomasi
  double harris_k = 0.04;
  double response_threshold_frac = 0.01;  // of the max response over the image
  // FAST
  int fast_threshold = 20;
  // Oriented FAST pyramid
  int pyramid_levels = 4;
  double pyramid_scale = 1.2;
};

constexpr int kMinDetectSize = 32;     // minimum image side for detection
constexpr int kPatchRadius = 15;       // BRIEF sampling disc radius
constexpr int kDescriptorBorder = 16;  // keypoints closer than this are dropped

namespace detail {

// --- structure tensor responses --------------------------------------------

// 5-tap Gaussian, sigma = 1.0, normalized.
constexpr double kGauss5[5] = {0.05448868454964294, 0.24420134200323332, 0.4026199468942474,
                               0.24420134200323332, 0.05448868454964294};

// Sobel 3x3 gradients with clamp-to-edge, gradient products smoothed by the
// separable 5x5 Gaussian, response at every pixel. Harris: det - k*trace^2;
// Shi-Tomasi: lambda_min. Accumulation in double; the float cast at the end
// is the only precision loss.
inline void structure_tensor_responses(const ImageU8& img, bool shi_tomasi, double k,
                                       std::vector<float>& response) {
  const int w = img.width, h = img.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;

  // Gradient products, exact in int32 (|g| <= 4*255 so g*g <= 1'040'400).
  std::vector<std::int32_t> pxx(n), pyy(n), pxy(n);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* rm = &img.data[static_cast<std::size_t>(std::max(y - 1, 0)) * w];
    const std::uint8_t* r0 = &img.data[static_cast<std::size_t>(y) * w];
    const std::uint8_t* rp = &img.data[static_cast<std::size_t>(std::min(y + 1, h - 1)) * w];
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const int gx = (rm[xp] + 2 * r0[xp] + rp[xp]) - (rm[xm] + 2 * r0[xm] + rp[xm]);
      const int gy = (rp[xm] + 2 * rp[x] + rp[xp]) - (rm[xm] + 2 * rm[x] + rm[xp]);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      pxx[i] = gx * gx;
      pyy[i] = gy * gy;
      pxy[i] = gx * gy;
    }
  }

  // Horizontal blur of the three product planes.
  std::vector<double> hxx(n), hyy(n), hxy(n);
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double axx = 0.0, ayy = 0.0, axy = 0.0;
      for (int t = -2; t <= 2; ++t) {
        const std::size_t j = row + static_cast<std::size_t>(std::clamp(x + t, 0, w - 1));
        const double g = kGauss5[t + 2];
        axx += g * pxx[j];
        ayy += g * pyy[j];
        axy += g * pxy[j];
      }
      hxx[row + x] = axx;
      hyy[row + x] = ayy;
      hxy[row + x] = axy;
    }
  }

  // Vertical blur fused with the response.
  response.resize(n);
  for (int y = 0; y < h; ++y) {
    std::size_t rows[5];
    for (int t = -2; t <= 2; ++t)
      rows[t + 2] = static_cast<std::size_t>(std::clamp(y + t, 0, h - 1)) * w;
    float* out = &response[static_cast<std::size_t>(y) * w];
    for (int x = 0; x < w; ++x) {
      double a = 0.0, b = 0.0, c = 0.0;
      for (int t = 0; t < 5; ++t) {
        const double g = kGauss5[t];
        a += g * hxx[rows[t] + x];
        b += g * hyy[rows[t] + x];
        c += g * hxy[rows[t] + x];
      }
      double r;
      if (shi_tomasi) {
        r = 0.5 * ((a + b) - std::sqrt((a - b) * (a - b) + 4.0 * c * c));
      } else {
        r = a * b - c * c - k * (a + b) * (a + b);
      }
      out[x] = static_cast<float>(r);
    }
  }
}

// --- FAST-9 -----------------------------------------------------------------

// The 16-pixel Bresenham circle of radius 3, clockwise from 12 o'clock.
constexpr int kFastCircle[16][2] = {{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0},   {3, 1},
                                    {2, 2},  {1, 3},  {0, 3},  {-1, 3}, {-2, 2},  {-3, 1},
                                    {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

// Segment test: a contiguous arc of >= 9 circle pixels all brighter than
// p + t or all darker than p - t. Returns the sum-of-absolute-differences
// score used for NMS (0 when not a corner).
inline float fast_score(const ImageU8& img, int x, int y, int t) {
  const std::uint8_t* base = img.data.data();
  const int w = img.width;
  const int p = base[static_cast<std::size_t>(y) * w + x];
  const int hi = p + t, lo = p - t;

  // Compass-point rejection: any 9-arc covers at least two of the four
  // pixels spaced 4 apart, so fewer than 2 bright and 2 dark rejects.
  int nb = 0, nd = 0;
  for (int i : {0, 4, 8, 12}) {
    const int v =
        base[static_cast<std::size_t>(y + kFastCircle[i][1]) * w + (x + kFastCircle[i][0])];
    if (v > hi) ++nb;
    if (v < lo) ++nd;
  }
  if (nb < 2 && nd < 2) return 0.0f;

  int circle[16];
  for (int i = 0; i < 16; ++i)
    circle[i] = base[static_cast<std::size_t>(y + kFastCircle[i][1]) * w + (x + kFastCircle[i][0])];

  std::uint32_t bright = 0, dark = 0;
  for (int i = 0; i < 16; ++i) {
    if (circle[i] > hi) bright |= (1u << i);
    if (circle[i] < lo) dark |= (1u << i);
  }
  // Run-length fold on the doubled mask: after AND-ing shifts 4,2,1,1 a set
  // bit marks the start of 9 consecutive set bits.
  auto has_arc9 = [](std::uint32_t m) {
    std::uint32_t acc = m | (m << 16);
    acc &= acc >> 4;
    acc &= acc >> 2;
    acc &= acc >> 1;
    acc &= acc >> 1;
    return (acc & 0xffffu) != 0;
  };

  float best = 0.0f;
  if (has_arc9(bright)) {
    int s = 0;
    for (int i = 0; i < 16; ++i)
      if (bright & (1u << i)) s += circle[i] - p - t;
    best = static_cast<float>(s);
  }
  if (has_arc9(dark)) {
    int s = 0;
    for (int i = 0; i < 16; ++i)
      if (dark & (1u << i)) s += p - circle[i] - t;
    best = std::max(best, static_cast<float>(s));
  }
  return best;
}

// --- candidate selection ----------------------------------------------------

// Strict local maximum over the 3x3 neighborhood, with >= toward later
// scan-order neighbors so exactly one pixel survives per plateau.
inline bool local_max_3x3(const std::vector<float>& r, int w, int h, int x, int y) {
  const std::size_t i = static_cast<std::size_t>(y) * w + x;
  const float v = r[i];
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const int nx = x + dx, ny = y + dy;
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      const float nv = r[static_cast<std::size_t>(ny) * w + nx];
      const bool before = (dy < 0) || (dy == 0 && dx < 0);
      if (before ? nv >= v : nv > v) return false;
    }
  }
  return true;
}

// Greedy NMS on response-sorted candidates; ties broken by (y, x) so the
// result is a pure function of the input. Bucketed by cells of nms_radius
// to keep it near-linear.
inline std::vector<Keypoint> nms_select(std::vector<Keypoint> cands, double radius,
                                        int max_keypoints) {
  std::sort(cands.begin(), cands.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (radius <= 0.0) {
    if (static_cast<int>(cands.size()) > max_keypoints)
      cands.resize(static_cast<std::size_t>(max_keypoints));
    return cands;
  }

  const double r2 = radius * radius;
  std::vector<Keypoint> kept;
  kept.reserve(std::min<std::size_t>(cands.size(), static_cast<std::size_t>(max_keypoints)));
  std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
  auto cell_key = [radius](double x, double y) {
    const auto cx = static_cast<std::int64_t>(std::floor(x / radius));
    const auto cy = static_cast<std::int64_t>(std::floor(y / radius));
    return (cx << 32) ^ (cy & 0xffffffffLL);
  };
  for (const Keypoint& kp : cands) {
    bool suppressed = false;
    const auto cx = static_cast<std::int64_t>(std::floor(kp.x / radius));
    const auto cy = static_cast<std::int64_t>(std::floor(kp.y / radius));
    for (std::int64_t dy = -1; dy <= 1 && !suppressed; ++dy) {
      for (std::int64_t dx = -1; dx <= 1 && !suppressed; ++dx) {
        auto it = grid.find(((cx + dx) << 32) ^ ((cy + dy) & 0xffffffffLL));
        if (it == grid.end()) continue;
        for (std::size_t idx : it->second) {
          const double ddx = kept[idx].x - kp.x;
          const double ddy = kept[idx].y - kp.y;
          if (ddx * ddx + ddy * ddy <= r2) {
            suppressed = true;
            break;
          }
        }
      }
    }
    if (suppressed) continue;
    grid[cell_key(kp.x, kp.y)].push_back(kept.size());
    kept.push_back(kp);
    if (static_cast<int>(kept.size()) >= max_keypoints) break;
  }
  return kept;
}

inline std::vector<Keypoint> detect_single_scale(const ImageU8& img, DetectorKind kind,
                                                 const DetectorParams& params) {
  std::vector<Keypoint> cands;
  if (kind == DetectorKind::Harris || kind == DetectorKind::ShiTomasi) {
    std::vector<float> resp;
    structure_tensor_responses(img, kind == DetectorKind::ShiTomasi, params.harris_k, resp);
    float max_resp = 0.0f;
    for (float r : resp) max_resp = std::max(max_resp, r);
    if (max_resp <= 0.0f) return {};
    const float thr = static_cast<float>(params.response_threshold_frac) * max_resp;
    for (int y = 0; y < img.height; ++y) {
      const float* row = &resp[static_cast<std::size_t>(y) * img.width];
      for (int x = 0; x < img.width; ++x) {
        if (row[x] > thr && row[x] > 0.0f && local_max_3x3(resp, img.width, img.height, x, y))
          cands.push_back({static_cast<float>(x), static_cast<float>(y), row[x], 0.0f, 0});
      }
    }
  } else {
    const int w = img.width, h = img.height;
    std::vector<float> score(static_cast<std::size_t>(w) * h, 0.0f);
    for (int y = 3; y < h - 3; ++y)
      for (int x = 3; x < w - 3; ++x)
        score[static_cast<std::size_t>(y) * w + x] = fast_score(img, x, y, params.fast_threshold);
    for (int y = 3; y < h - 3; ++y) {
      const float* row = &score[static_cast<std::size_t>(y) * w];
      for (int x = 3; x < w - 3; ++x) {
        if (row[x] > 0.0f && local_max_3x3(score, w, h, x, y))
          cands.push_back({static_cast<float>(x), static_cast<float>(y), row[x], 0.0f, 0});
      }
    }
  }
  return cands;
}

// Intensity-centroid orientation over a disc of radius 15 (the ORB
// convention); reads clamp to the image border.
inline float intensity_centroid_angle(const ImageU8& img, int cx, int cy) {
  double m01 = 0.0, m10 = 0.0;
  for (int dy = -kPatchRadius; dy <= kPatchRadius; ++dy) {
    for (int dx = -kPatchRadius; dx <= kPatchRadius; ++dx) {
      if (dx * dx + dy * dy > kPatchRadius * kPatchRadius) continue;
      const int v = img.at(std::clamp(cy + dy, 0, img.height - 1),
                           std::clamp(cx + dx, 0, img.width - 1));
      m10 += dx * v;
      m01 += dy * v;
    }
  }
  if (m01 == 0.0 && m10 == 0.0) return 0.0f;
  return static_cast<float>(std::atan2(m01, m10));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// build_pyramid: level k has dimensions floor(dim / scale^k); truncated
// before the first level whose smaller side would go below the detection
// minimum.
inline std::vector<ImageU8> build_pyramid(const ImageU8& img, int n_levels, double scale_factor) {
  if (n_levels < 1) fail(Err::InvariantViolation, "pyramid needs >= 1 level");
  if (!(scale_factor > 1.0)) fail(Err::InvariantViolation, "pyramid scale must be > 1");
  std::vector<ImageU8> levels;
  levels.push_back(img);
  for (int k = 1; k < n_levels; ++k) {
    const double s = std::pow(scale_factor, k);
    const int w = static_cast<int>(std::floor(img.width / s));
    const int h = static_cast<int>(std::floor(img.height / s));
    if (std::min(w, h) < kMinDetectSize) break;
    levels.push_back(to_u8(resize(to_f32(img), w, h, InterpolationKind::Linear)));
  }
  return levels;
}

// ---------------------------------------------------------------------------
// detect: response-sorted, NMS-filtered keypoints. OrientedFast runs FAST on
// a scale pyramid, computes the intensity-centroid orientation per level and
// maps coordinates to level 0; the other detectors are single-scale. NMS is
// applied in level-0 coordinates across all levels.
inline std::vector<Keypoint> detect(const ImageU8& img, DetectorKind kind,
                                    const DetectorParams& params = {}) {
  if (std::min(img.width, img.height) < kMinDetectSize)
    fail(Err::ImageTooSmall, "detection needs at least " + std::to_string(kMinDetectSize) +
                                 "px per side, got " + std::to_string(img.width) + "x" +
                                 std::to_string(img.height));

  std::vector<Keypoint> cands;
  if (kind == DetectorKind::OrientedFast) {
    const auto pyramid = build_pyramid(img, params.pyramid_levels, params.pyramid_scale);
    for (std::size_t k = 0; k < pyramid.size(); ++k) {
      auto level_kps = detail::detect_single_scale(pyramid[k], DetectorKind::Fast, params);
      const double sx = static_cast<double>(img.width) / pyramid[k].width;
      const double sy = static_cast<double>(img.height) / pyramid[k].height;
      for (Keypoint kp : level_kps) {
        kp.angle = detail::intensity_centroid_angle(pyramid[k], static_cast<int>(kp.x),
                                                    static_cast<int>(kp.y));
        kp.x = static_cast<float>(kp.x * sx);
        kp.y = static_cast<float>(kp.y * sy);
        kp.octave = static_cast<int>(k);
        cands.push_back(kp);
      }
    }
  } else {
    cands = detail::detect_single_scale(img, kind, params);
  }
  return detail::nms_select(std::move(cands), params.nms_radius, params.max_keypoints);
}

// ---------------------------------------------------------------------------
// BRIEF sampling pattern: 256 point pairs from an isotropic Gaussian
// (sigma = patch/5), rejection-sampled into the radius-15 disc so that any
// rotation keeps every sample inside the descriptor border. Generated once
// from a fixed seed; treat seed and procedure as a versioned constant —
// changing either changes every descriptor ever produced.
constexpr std::uint64_t kBriefPatternSeed = 0x42b1ef5eedULL;

struct BriefPattern {
  std::array<std::int8_t, 1024> coords;  // p.x p.y q.x q.y per test
};

inline const BriefPattern& brief_pattern() {
  static const BriefPattern pattern = [] {
    BriefPattern p{};
    Pcg32 rng(kBriefPatternSeed);
    const double sigma = (2 * kPatchRadius + 1) / 5.0;
    auto draw = [&rng, sigma]() {
      for (;;) {
        const double x = rng.normal() * sigma;
        const double y = rng.normal() * sigma;
        if (x * x + y * y <= kPatchRadius * kPatchRadius)
          return std::pair<int, int>{static_cast<int>(std::lround(x)),
                                     static_cast<int>(std::lround(y))};
      }
    };
    for (int i = 0; i < 256; ++i) {
      auto [px, py] = draw();
      auto [qx, qy] = draw();
      p.coords[static_cast<std::size_t>(4 * i + 0)] = static_cast<std::int8_t>(px);
      p.coords[static_cast<std::size_t>(4 * i + 1)] = static_cast<std::int8_t>(py);
      p.coords[static_cast<std::size_t>(4 * i + 2)] = static_cast<std::int8_t>(qx);
      p.coords[static_cast<std::size_t>(4 * i + 3)] = static_cast<std::int8_t>(qy);
    }
    return p;
  }();
  return pattern;
}

// describe: BRIEF samples the pattern as-is; RotatedBrief rotates it by the
// keypoint angle (computing the intensity-centroid orientation first when
// the detector left it at 0). Bit convention: 1 iff I(p) < I(q), strictly.
// Keypoints within kDescriptorBorder of the border are dropped, so all
// pattern reads stay inside the image.
inline std::vector<Descriptor> describe(const ImageU8& img, const std::vector<Keypoint>& kps,
                                        DescriptorKind kind) {
  const BriefPattern& pat = brief_pattern();
  std::vector<Descriptor> out;
  out.reserve(kps.size());
  for (std::size_t ki = 0; ki < kps.size(); ++ki) {
    const Keypoint& kp = kps[ki];
    const int cx = static_cast<int>(std::lround(kp.x));
    const int cy = static_cast<int>(std::lround(kp.y));
    if (cx < kDescriptorBorder || cy < kDescriptorBorder ||
        cx > img.width - 1 - kDescriptorBorder || cy > img.height - 1 - kDescriptorBorder)
      continue;

    float angle = 0.0f;
    if (kind == DescriptorKind::RotatedBrief) {
      angle = kp.angle != 0.0f ? kp.angle : detail::intensity_centroid_angle(img, cx, cy);
    }
    const float ca = std::cos(angle), sa = std::sin(angle);

    Descriptor d;
    d.keypoint_index = static_cast<std::int32_t>(ki);
    for (int i = 0; i < 256; ++i) {
      const int px = pat.coords[static_cast<std::size_t>(4 * i + 0)];
      const int py = pat.coords[static_cast<std::size_t>(4 * i + 1)];
      const int qx = pat.coords[static_cast<std::size_t>(4 * i + 2)];
      const int qy = pat.coords[static_cast<std::size_t>(4 * i + 3)];
      int pxi, pyi, qxi, qyi;
      if (kind == DescriptorKind::Brief) {
        pxi = cx + px;
        pyi = cy + py;
        qxi = cx + qx;
        qyi = cy + qy;
      } else {
        pxi = cx + static_cast<int>(std::lround(ca * px - sa * py));
        pyi = cy + static_cast<int>(std::lround(sa * px + ca * py));
        qxi = cx + static_cast<int>(std::lround(ca * qx - sa * qy));
        qyi = cy + static_cast<int>(std::lround(sa * qx + ca * qy));
      }
      if (img.at(pyi, pxi) < img.at(qyi, qxi)) d.set_bit(i);
    }
    out.push_back(d);
  }
  return out;
}

}  // namespace lkp
