#include <catch2/catch_amalgamated.hpp>

#include "lkp/features.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace lkp;

namespace {

// Independent greedy NMS for the oracle path: quadratic but obvious.
std::vector<Keypoint> oracle_nms(std::vector<Keypoint> cands, double radius, int cap) {
  std::sort(cands.begin(), cands.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  std::vector<Keypoint> kept;
  for (const Keypoint& kp : cands) {
    bool ok = true;
    for (const Keypoint& q : kept) {
      const double dx = q.x - kp.x, dy = q.y - kp.y;
      if (dx * dx + dy * dy <= radius * radius) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(kp);
    if (static_cast<int>(kept.size()) >= cap) break;
  }
  return kept;
}

bool near_any_corner(const Keypoint& kp, const std::vector<std::pair<int, int>>& corners,
                     double tol) {
  for (auto [cx, cy] : corners) {
    const double dx = kp.x - cx, dy = kp.y - cy;
    if (std::sqrt(dx * dx + dy * dy) <= tol) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("uniform images yield no keypoints for any detector") {
  const ImageU8 img(64, 64, 128);
  for (auto det : {DetectorKind::Harris, DetectorKind::ShiTomasi, DetectorKind::Fast,
                   DetectorKind::OrientedFast})
    CHECK(detect(img, det).empty());
}

TEST_CASE("detect rejects images below the minimum size") {
  const ImageU8 img(64, 31, 0);
  REQUIRE_THROWS_MATCHES(detect(img, DetectorKind::Harris), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Err::ImageTooSmall; }));
}

TEST_CASE("harris finds the four corners of a white square") {
  const ImageU8 img = test::square_image(64, 64, 24, 28, 8);
  const std::vector<std::pair<int, int>> corners{{24, 28}, {31, 28}, {24, 35}, {31, 35}};
  const auto kps = detect(img, DetectorKind::Harris);
  REQUIRE(kps.size() >= 4);

  // The four strongest responses must each sit within 1.5 px of a distinct
  // corner.
  std::vector<bool> covered(4, false);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(near_any_corner(kps[i], corners, 1.5));
    for (std::size_t c = 0; c < 4; ++c) {
      const double dx = kps[i].x - corners[c].first, dy = kps[i].y - corners[c].second;
      if (std::sqrt(dx * dx + dy * dy) <= 1.5) covered[c] = true;
    }
  }
  for (bool c : covered) CHECK(c);

  // Dense-oracle cross-check: the oracle's four strongest maxima sit at the
  // same corners.
  const auto resp = oracle::dense_corner_response(img, false, 0.04);
  std::vector<Keypoint> oracle_cands;
  for (int y = 1; y < 63; ++y)
    for (int x = 1; x < 63; ++x) {
      const double v = resp[static_cast<std::size_t>(y) * 64 + x];
      if (v <= 0) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (dx | dy) is_max &= v >= resp[static_cast<std::size_t>(y + dy) * 64 + (x + dx)];
      if (is_max)
        oracle_cands.push_back(
            {static_cast<float>(x), static_cast<float>(y), static_cast<float>(v), 0, 0});
    }
  const auto oracle_kps = oracle_nms(oracle_cands, 4.0, 4);
  REQUIRE(oracle_kps.size() == 4);
  for (const Keypoint& okp : oracle_kps) CHECK(near_any_corner(okp, corners, 1.5));
}

TEST_CASE("fast finds the square corners") {
  const ImageU8 img = test::square_image(64, 64, 20, 20, 8);
  DetectorParams dp;
  dp.fast_threshold = 20;
  const auto kps = detect(img, DetectorKind::Fast, dp);
  REQUIRE(kps.size() >= 4);
  const std::vector<std::pair<int, int>> corners{{20, 20}, {27, 20}, {20, 27}, {27, 27}};
  for (const Keypoint& kp : kps) CHECK(near_any_corner(kp, corners, 2.0));
}

TEST_CASE("fast score map equals the exhaustive segment-test oracle exactly") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const ImageU8 img = test::random_image(48, 40, seed);
    for (int y = 3; y < 37; ++y)
      for (int x = 3; x < 45; ++x)
        REQUIRE(static_cast<double>(detail::fast_score(img, x, y, 20)) ==
                oracle::exhaustive_fast_score(img, x, y, 20));
  }
}

TEST_CASE("fast keypoints equal an independently selected oracle list") {
  DetectorParams dp;
  dp.fast_threshold = 20;
  for (std::uint64_t seed : {5ULL, 6ULL}) {
    const ImageU8 img = test::random_image(64, 48, seed);
    const auto kps = detect(img, DetectorKind::Fast, dp);

    std::vector<double> score(static_cast<std::size_t>(64) * 48, 0.0);
    for (int y = 3; y < 45; ++y)
      for (int x = 3; x < 61; ++x)
        score[static_cast<std::size_t>(y) * 64 + x] = oracle::exhaustive_fast_score(img, x, y, 20);
    std::vector<Keypoint> cands;
    for (int y = 3; y < 45; ++y)
      for (int x = 3; x < 61; ++x) {
        const double v = score[static_cast<std::size_t>(y) * 64 + x];
        if (v <= 0) continue;
        bool keep = true;
        for (int dy = -1; dy <= 1 && keep; ++dy)
          for (int dx = -1; dx <= 1 && keep; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const double nv = score[static_cast<std::size_t>(y + dy) * 64 + (x + dx)];
            const bool before = (dy < 0) || (dy == 0 && dx < 0);
            if (before ? nv >= v : nv > v) keep = false;
          }
        if (keep)
          cands.push_back(
              {static_cast<float>(x), static_cast<float>(y), static_cast<float>(v), 0, 0});
      }
    const auto expect = oracle_nms(cands, dp.nms_radius, dp.max_keypoints);

    REQUIRE(kps.size() == expect.size());
    for (std::size_t i = 0; i < kps.size(); ++i) {
      CHECK(kps[i].x == expect[i].x);
      CHECK(kps[i].y == expect[i].y);
      CHECK(kps[i].response == expect[i].response);
    }
  }
}

TEST_CASE("harris and shi-tomasi responses match the dense oracle within 1e-6 relative") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ImageU8 img = test::random_image(64, 64, 100 + seed);
    for (bool shi : {false, true}) {
      std::vector<float> resp;
      detail::structure_tensor_responses(img, shi, 0.04, resp);
      const auto expect = oracle::dense_corner_response(img, shi, 0.04);
      double max_abs = 0.0;
      for (double v : expect) max_abs = std::max(max_abs, std::abs(v));
      for (std::size_t i = 0; i < resp.size(); ++i)
        REQUIRE(std::abs(static_cast<double>(resp[i]) - expect[i]) <= 1e-6 * max_abs);
    }
  }
}

TEST_CASE("detect is deterministic") {
  const ImageU8 img = test::random_image(128, 64, 77);
  for (auto det : {DetectorKind::Harris, DetectorKind::Fast, DetectorKind::OrientedFast}) {
    const auto a = detect(img, det);
    const auto b = detect(img, det);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].x == b[i].x);
      CHECK(a[i].y == b[i].y);
      CHECK(a[i].response == b[i].response);
      CHECK(a[i].angle == b[i].angle);
    }
  }
}

TEST_CASE("no two retained keypoints sit within the NMS radius") {
  DetectorParams dp;
  for (auto det : {DetectorKind::Harris, DetectorKind::ShiTomasi, DetectorKind::Fast,
                   DetectorKind::OrientedFast}) {
    const auto kps = detect(test::random_image(96, 64, 31), det, dp);
    CHECK(kps.size() <= static_cast<std::size_t>(dp.max_keypoints));
    for (std::size_t i = 0; i < kps.size(); ++i) {
      for (std::size_t j = i + 1; j < kps.size(); ++j) {
        const double dx = kps[i].x - kps[j].x, dy = kps[i].y - kps[j].y;
        CHECK(dx * dx + dy * dy > dp.nms_radius * dp.nms_radius);
      }
    }
  }
}

TEST_CASE("keypoints are sorted by descending response and capped") {
  DetectorParams dp;
  dp.max_keypoints = 10;
  const auto kps = detect(test::random_image(128, 64, 13), DetectorKind::Fast, dp);
  CHECK(kps.size() <= 10);
  for (std::size_t i = 1; i < kps.size(); ++i) CHECK(kps[i - 1].response >= kps[i].response);
}

TEST_CASE("build_pyramid with one level returns the input") {
  const ImageU8 img = test::random_image(64, 64, 1);
  const auto pyr = build_pyramid(img, 1, 1.2);
  REQUIRE(pyr.size() == 1);
  CHECK(pyr[0].data == img.data);
}

TEST_CASE("build_pyramid floors dimensions per level") {
  const ImageU8 img(1024, 64, 50);
  const auto pyr = build_pyramid(img, 4, 1.2);
  REQUIRE(pyr.size() == 4);
  const std::pair<int, int> want[4] = {{1024, 64}, {853, 53}, {711, 44}, {592, 37}};
  for (int k = 0; k < 4; ++k) {
    CHECK(pyr[static_cast<std::size_t>(k)].width == want[k].first);
    CHECK(pyr[static_cast<std::size_t>(k)].height == want[k].second);
  }
}

TEST_CASE("build_pyramid truncates when a level falls below the detection minimum") {
  const ImageU8 img(64, 32, 50);
  const auto pyr = build_pyramid(img, 8, 2.0);
  REQUIRE(pyr.size() == 1);  // level 1 would be 32x16
}

TEST_CASE("describe on a constant patch yields all-zero bits") {
  const ImageU8 img(64, 64, 99);
  std::vector<Keypoint> kps{{32.0f, 32.0f, 1.0f, 0.0f, 0}};
  for (auto kind : {DescriptorKind::Brief, DescriptorKind::RotatedBrief}) {
    const auto descs = describe(img, kps, kind);
    REQUIRE(descs.size() == 1);
    for (int b = 0; b < 256; ++b) CHECK_FALSE(descs[0].get_bit(b));
  }
}

TEST_CASE("describe is deterministic") {
  const ImageU8 img = test::random_image(96, 96, 8);
  const auto kps = detect(img, DetectorKind::Fast);
  const auto a = describe(img, kps, DescriptorKind::RotatedBrief);
  const auto b = describe(img, kps, DescriptorKind::RotatedBrief);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].bits == b[i].bits);
    CHECK(a[i].keypoint_index == b[i].keypoint_index);
  }
}

TEST_CASE("rotated brief survives a 90 degree rotation within 64 bits") {
  // Asymmetric texture described at the same physical spot in the original
  // and the rotated image.
  ImageU8 img = test::random_image(96, 96, 55);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) img.at(y, x) = static_cast<std::uint8_t>((x * 5 + y * 3) & 0xff);

  const ImageU8 rot = rotate90_cw(img);
  std::vector<Keypoint> kp0{{47.0f, 47.0f, 1.0f, 0.0f, 0}};
  // (x,y) -> (h-1-y, x) under the clockwise rotation.
  std::vector<Keypoint> kp1{{static_cast<float>(96 - 1 - 47), 47.0f, 1.0f, 0.0f, 0}};

  const auto d0 = describe(img, kp0, DescriptorKind::RotatedBrief);
  const auto d1 = describe(rot, kp1, DescriptorKind::RotatedBrief);
  REQUIRE(d0.size() == 1);
  REQUIRE(d1.size() == 1);
  CHECK(hamming_distance(d0[0], d1[0]) <= 64);
}

TEST_CASE("describe drops border keypoints instead of reading out of bounds") {
  const ImageU8 img = test::random_image(64, 48, 21);
  Pcg32 rng(500);
  std::vector<Keypoint> kps;
  for (int i = 0; i < 300; ++i)
    kps.push_back({static_cast<float>(rng.uniform(-2.0, 66.0)),
                   static_cast<float>(rng.uniform(-2.0, 50.0)), 1.0f, 0.0f, 0});
  for (auto kind : {DescriptorKind::Brief, DescriptorKind::RotatedBrief}) {
    const auto descs = describe(img, kps, kind);
    CHECK(descs.size() <= kps.size());
    for (const auto& d : descs) {
      const Keypoint& kp = kps[static_cast<std::size_t>(d.keypoint_index)];
      CHECK(std::lround(kp.x) >= kDescriptorBorder);
      CHECK(std::lround(kp.y) >= kDescriptorBorder);
      CHECK(std::lround(kp.x) <= img.width - 1 - kDescriptorBorder);
      CHECK(std::lround(kp.y) <= img.height - 1 - kDescriptorBorder);
    }
  }
}

TEST_CASE("brief pattern stays within the sampling disc") {
  const BriefPattern& pat = brief_pattern();
  for (int i = 0; i < 1024; i += 2) {
    const int x = pat.coords[static_cast<std::size_t>(i)];
    const int y = pat.coords[static_cast<std::size_t>(i + 1)];
    CHECK(x * x + y * y <= (kPatchRadius + 1) * (kPatchRadius + 1));
  }
}

TEST_CASE("oriented fast maps pyramid keypoints back to level-0 coordinates") {
  DetectorParams dp;
  dp.pyramid_levels = 3;
  const ImageU8 img = test::random_image(256, 96, 17);
  const auto kps = detect(img, DetectorKind::OrientedFast, dp);
  REQUIRE_FALSE(kps.empty());
  bool has_upper_octave = false;
  for (const Keypoint& kp : kps) {
    CHECK(kp.x >= 0.0f);
    CHECK(kp.x < 256.0f);
    CHECK(kp.y >= 0.0f);
    CHECK(kp.y < 96.0f);
    has_upper_octave |= kp.octave > 0;
  }
  CHECK(has_upper_octave);
}
