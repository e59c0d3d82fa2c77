#include <catch2/catch_amalgamated.hpp>

#include "lkp/cloud_image.hpp"
#include "helpers.hpp"

using namespace lkp;

namespace {

// 131072 points with rings 0..127 and cols 0..2047: the published frames
// carry half as many returns as the image has pixels, so every other column
// is populated.
PointCloud full_os0_cloud(std::uint64_t seed) {
  const SensorGeometry geom;
  PointCloud cloud;
  cloud.reserve(static_cast<std::size_t>(geom.width) * geom.height / 2);
  Pcg32 rng(seed);
  for (int r = 0; r < geom.height; ++r)
    for (int c = 0; c < geom.width; c += 2)
      cloud.push_back({static_cast<float>(c), static_cast<float>(r), 0.0f},
                      static_cast<float>(rng.uniform(1.0, 500.0)),
                      static_cast<float>(rng.uniform(0.5, 40.0)),
                      static_cast<std::uint16_t>(r), static_cast<std::uint16_t>(c));
  return cloud;
}

}  // namespace

TEST_CASE("project places a full OS0-128 sweep onto a 2048x128 image") {
  const PointCloud cloud = full_os0_cloud(11);
  REQUIRE(cloud.size() == 131072);
  const LidarImage img = project(cloud, Modality::Signal);
  CHECK(img.width() == 2048);
  CHECK(img.height() == 128);
  REQUIRE(img.has_point_map());

  // Round-trip: every valid pixel equals its source point's modality value.
  for (int r = 0; r < img.height(); r += 7) {
    for (int c = 0; c < img.width(); c += 14) {
      const auto idx = img.point_at(r, c);
      REQUIRE(idx >= 0);
      CHECK(img.img.at(r, c) == cloud.signal[static_cast<std::size_t>(idx)]);
    }
  }
  CHECK(img.point_at(0, 1) == -1);  // odd columns carry no return
}

TEST_CASE("project rejects an empty cloud") {
  PointCloud cloud;
  REQUIRE_THROWS_MATCHES(project(cloud, Modality::Signal), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Err::EmptyCloud; }));
}

TEST_CASE("project direct placement on a 2x2 grid") {
  SensorGeometry geom;
  geom.width = 2;
  geom.height = 2;
  PointCloud cloud;
  cloud.push_back({0, 0, 0}, 7.0f, 1.0f, 0, 0);
  cloud.push_back({1, 1, 0}, 9.0f, 1.0f, 1, 1);
  const LidarImage img = project(cloud, Modality::Signal, geom);
  CHECK(img.img.at(0, 0) == 7.0f);
  CHECK(img.img.at(0, 1) == 0.0f);
  CHECK(img.img.at(1, 0) == 0.0f);
  CHECK(img.img.at(1, 1) == 9.0f);
  CHECK(img.point_at(0, 1) == -1);
}

TEST_CASE("project rejects duplicated beam indices") {
  SensorGeometry geom;
  geom.width = 2;
  geom.height = 2;
  PointCloud cloud;
  cloud.push_back({0, 0, 0}, 1.0f, 1.0f, 0, 0);
  cloud.push_back({0, 0, 0}, 2.0f, 1.0f, 0, 0);
  REQUIRE_THROWS_MATCHES(project(cloud, Modality::Signal, geom), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Err::DuplicateBeamIndex; }));
}

TEST_CASE("normalize_u8 maps a constant image to 255") {
  LidarImage img;
  img.img = ImageF(8, 8, 5.0f);
  const LidarImage out = normalize_u8(img, 0.0, 1.0);
  for (float v : out.img.data) CHECK(v == 255.0f);
}

TEST_CASE("normalize_u8 is the identity on a full 0..255 ramp") {
  LidarImage img;
  img.img = ImageF(16, 16);
  for (int i = 0; i < 256; ++i) img.img.data[static_cast<std::size_t>(i)] = static_cast<float>(i);
  const LidarImage out = normalize_u8(img, 0.0, 1.0);
  for (int i = 0; i < 256; ++i)
    CHECK(out.img.data[static_cast<std::size_t>(i)] == static_cast<float>(i));
}

TEST_CASE("normalize_u8 affine map over {10,20,30,40}") {
  LidarImage img;
  img.img = ImageF(2, 2);
  img.img.data = {10, 20, 30, 40};
  const LidarImage out = normalize_u8(img, 0.0, 1.0);
  CHECK(out.img.data[0] == 0.0f);
  CHECK(out.img.data[1] == 85.0f);
  CHECK(out.img.data[2] == 170.0f);
  CHECK(out.img.data[3] == 255.0f);
}

TEST_CASE("normalize_u8 rejects an all-invalid image") {
  SensorGeometry geom;
  geom.width = 2;
  geom.height = 1;
  PointCloud cloud;
  cloud.push_back({0, 0, 0}, 1.0f, 0.0f, 0, 0);  // no-return entry only
  cloud.push_back({0, 0, 0}, 2.0f, 1.0f, 0, 1);
  LidarImage img = project(cloud, Modality::Signal, geom);
  img.pixel_to_point.assign(img.pixel_to_point.size(), -1);
  REQUIRE_THROWS_MATCHES(normalize_u8(img), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Err::AllInvalid; }));
}

TEST_CASE("normalize_u8 is monotone in the input") {
  LidarImage img;
  img.img = test::random_imagef(32, 16, 42, 0.0f, 5000.0f);
  const LidarImage out = normalize_u8(img, 0.01, 0.99);
  for (std::size_t i = 0; i < img.img.data.size(); ++i)
    for (std::size_t j = 0; j < img.img.data.size(); j += 37)
      if (img.img.data[i] <= img.img.data[j]) CHECK(out.img.data[i] <= out.img.data[j]);
}

TEST_CASE("resize to own size with Nearest is bitwise identity") {
  const ImageF img = test::random_imagef(33, 17, 3);
  const ImageF out = resize(img, 33, 17, InterpolationKind::Nearest);
  CHECK(out.data == img.data);
}

TEST_CASE("area downscale of a 4x4 checkerboard averages each block") {
  ImageF img(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) img.at(y, x) = ((x + y) & 1) ? 255.0f : 0.0f;
  const ImageF out = resize(img, 2, 2, InterpolationKind::Area);
  for (float v : out.data) CHECK(v == Catch::Approx(127.5).margin(1e-4));
  // Round-half-away-from-zero quantization lands on 128.
  const ImageU8 q = to_u8(out);
  for (auto v : q.data) CHECK(static_cast<int>(v) == 128);
}

TEST_CASE("area downscale equals a block-mean oracle on block-aligned factors") {
  const ImageF img = test::random_imagef(64, 32, 9);
  const ImageF out = resize(img, 16, 8, InterpolationKind::Area);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 16; ++x) {
      double mean = 0.0;
      for (int dy = 0; dy < 4; ++dy)
        for (int dx = 0; dx < 4; ++dx) mean += img.at(4 * y + dy, 4 * x + dx);
      mean /= 16.0;
      CHECK(out.at(y, x) == Catch::Approx(mean).margin(1e-3));
    }
  }
}

TEST_CASE("nearest upsample then downsample by the same factor is identity") {
  const ImageF img = test::random_imagef(24, 12, 5);
  const ImageF up = resize(img, 72, 36, InterpolationKind::Nearest);
  const ImageF down = resize(up, 24, 12, InterpolationKind::Nearest);
  CHECK(down.data == img.data);
}

TEST_CASE("nearest, linear and area stay within the input value range") {
  const ImageF img = test::random_imagef(40, 20, 7, 10.0f, 200.0f);
  const float lo = *std::min_element(img.data.begin(), img.data.end());
  const float hi = *std::max_element(img.data.begin(), img.data.end());
  for (auto kind :
       {InterpolationKind::Nearest, InterpolationKind::Linear, InterpolationKind::Area}) {
    for (auto [w, h] : {std::pair{80, 40}, std::pair{23, 11}, std::pair{40, 20}}) {
      const ImageF out = resize(img, w, h, kind);
      for (float v : out.data) {
        CHECK(v >= lo - 1e-3f);
        CHECK(v <= hi + 1e-3f);
      }
    }
  }
}

TEST_CASE("cubic and lanczos overshoot is clamped by quantization") {
  ImageF img(16, 16, 0.0f);
  for (int y = 6; y < 10; ++y)
    for (int x = 6; x < 10; ++x) img.at(y, x) = 255.0f;
  for (auto kind : {InterpolationKind::Cubic, InterpolationKind::Lanczos4}) {
    const ImageF out = resize(img, 37, 37, kind);
    bool overshoot = false;
    for (float v : out.data) overshoot |= (v < 0.0f || v > 255.0f);
    CHECK(overshoot);  // ringing exists before quantization
    const ImageU8 q = to_u8(out);
    for (auto v : q.data) {
      CHECK(static_cast<int>(v) >= 0);
      CHECK(static_cast<int>(v) <= 255);
    }
  }
}

TEST_CASE("all kernels keep a constant image constant") {
  const ImageF img(31, 13, 77.0f);
  for (auto kind : {InterpolationKind::Nearest, InterpolationKind::Linear,
                    InterpolationKind::Cubic, InterpolationKind::Area,
                    InterpolationKind::Lanczos4}) {
    const ImageF out = resize(img, 50, 29, kind);
    for (float v : out.data) CHECK(v == Catch::Approx(77.0).margin(1e-3));
  }
}

TEST_CASE("scale_coords_to_native doubles coordinates from 1024x64 to 2048x128") {
  const auto [x, y] = scale_coords_to_native(100.0, 32.0, {1024, 64}, {2048, 128});
  CHECK(x == 200.0);
  CHECK(y == 64.0);
}

TEST_CASE("scale_coords_to_native identity dimensions keep coordinates") {
  const auto [x, y] = scale_coords_to_native(17.25, 3.5, {640, 480}, {640, 480});
  CHECK(x == 17.25);
  CHECK(y == 3.5);
}

TEST_CASE("scale_coords_to_native clamps at the native boundary") {
  const auto [x, y] = scale_coords_to_native(1023.5, 63.5, {1024, 64}, {2048, 128});
  CHECK(x == 2047.0);
  CHECK(y == 127.0);
}

TEST_CASE("preprocess_for_detection produces the paper-selected geometry") {
  const PointCloud cloud = full_os0_cloud(21);
  const LidarImage native = project(cloud, Modality::Signal);
  const ImageU8 img = preprocess_for_detection(native, 1024, 64, InterpolationKind::Linear);
  CHECK(img.width == 1024);
  CHECK(img.height == 64);
}
