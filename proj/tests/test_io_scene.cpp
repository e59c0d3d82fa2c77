#include <catch2/catch_amalgamated.hpp>

#include "lkp/manifest.hpp"
#include "lkp/scene.hpp"
#include "helpers.hpp"

using namespace lkp;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("lkp_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

SceneSpec small_room() {
  SceneSpec spec;
  spec.kind = SceneKind::Room;
  spec.dims = {8.0, 8.0, 3.0};
  spec.n_frames = 3;
  spec.geometry.width = 256;
  spec.geometry.height = 64;
  spec.noise_sigma = 0.01;
  spec.seed = 9;
  spec.waypoints = {{0, 0, 0}, {1.0, 0.5, 0}};
  spec.speed = 0.5;
  return spec;
}

}  // namespace

TEST_CASE("lkpc frames round-trip bit-exactly") {
  const PointCloud cloud = test::random_cloud(500, 77);
  const fs::path dir = temp_dir("lkpc");
  write_cloud(dir / "a.lkpc", cloud);
  const PointCloud back = read_cloud(dir / "a.lkpc");
  REQUIRE(back.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(back.points[i] == cloud.points[i]);
    CHECK(back.signal[i] == cloud.signal[i]);
    CHECK(back.range[i] == cloud.range[i]);
    CHECK(back.ring[i] == cloud.ring[i]);
    CHECK(back.col[i] == cloud.col[i]);
  }
}

TEST_CASE("read_cloud rejects a bad magic") {
  const fs::path dir = temp_dir("magic");
  std::ofstream(dir / "bad.lkpc") << "NOTLK\n";
  REQUIRE_THROWS_MATCHES(read_cloud(dir / "bad.lkpc"), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Err::ParseError; }));
}

TEST_CASE("tum trajectories round-trip within quaternion precision") {
  Trajectory traj;
  Pcg32 rng(5);
  for (int i = 0; i < 20; ++i) {
    Pose p;
    p.timestamp = 0.1 * i;
    p.translation = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1)};
    p.rotation = Eigen::AngleAxisd(rng.uniform(-3, 3), Eigen::Vector3d::UnitZ()).toRotationMatrix();
    traj.poses.push_back(p);
  }
  const fs::path dir = temp_dir("tum");
  write_tum(dir / "t.tum", traj);
  const Trajectory back = read_tum(dir / "t.tum");
  REQUIRE(back.size() == traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK(back.poses[i].timestamp == Catch::Approx(traj.poses[i].timestamp));
    CHECK((back.poses[i].translation - traj.poses[i].translation).norm() < 1e-7);
    CHECK(traj.poses[i].rotation_angle_to(back.poses[i]) < 1e-7);
  }
}

TEST_CASE("png writer emits a valid deterministic grayscale file") {
  const ImageU8 img = test::random_image(64, 32, 3);
  const fs::path dir = temp_dir("png");
  write_png(dir / "a.png", img);
  write_png(dir / "b.png", img);
  const std::string a = slurp(dir / "a.png");
  CHECK(a == slurp(dir / "b.png"));
  REQUIRE(a.size() > 8);
  CHECK(static_cast<unsigned char>(a[0]) == 0x89);
  CHECK(a.substr(1, 3) == "PNG");
  CHECK(a.find("IHDR") != std::string::npos);
  CHECK(a.find("IDAT") != std::string::npos);
  CHECK(a.find("IEND") != std::string::npos);
}

TEST_CASE("manifest round-trips and validates file presence") {
  const fs::path dir = temp_dir("manifest");
  DatasetManifest m;
  m.root = dir;
  m.geometry = {512, 64, 90.0, 30.0};
  const PointCloud cloud = test::random_cloud(100, 1);
  write_cloud(dir / "f0.lkpc", cloud);
  m.frames.push_back({0, 0.5, "f0.lkpc"});
  write_manifest(m);

  const DatasetManifest back = load_manifest(dir);
  CHECK(back.geometry.width == 512);
  CHECK(back.geometry.height == 64);
  REQUIRE(back.frames.size() == 1);
  CHECK(back.frames[0].timestamp == 0.5);
  CHECK_FALSE(back.ground_truth.has_value());
}

TEST_CASE("load_manifest names the missing frame file") {
  const fs::path dir = temp_dir("missing");
  DatasetManifest m;
  m.root = dir;
  m.geometry = {512, 64, 90.0, 30.0};
  m.frames.push_back({0, 0.0, "absent.lkpc"});
  // Bypass write_manifest's own frame write; create the listing directly.
  write_frames_txt(dir / "frames.txt", m.frames);
  std::ofstream(dir / "manifest.json")
      << R"({"sensor":{"width":512,"height":64},"frames":"frames.txt"})";
  try {
    load_manifest(dir);
    FAIL("expected MissingFile");
  } catch (const Error& e) {
    CHECK(e.code() == Err::MissingFile);
    CHECK(std::string(e.what()).find("absent.lkpc") != std::string::npos);
  }
}

TEST_CASE("dataset read validates cloud invariants") {
  const fs::path dir = temp_dir("invariant");
  PointCloud cloud;
  cloud.push_back({0, 0, 0}, 1, 1, 0, 0);
  cloud.push_back({1, 0, 0}, 1, 1, 0, 0);  // duplicate (ring, col)
  write_cloud(dir / "f0.lkpc", cloud);
  DatasetManifest m;
  m.root = dir;
  m.geometry = {512, 64, 90.0, 30.0};
  m.frames.push_back({0, 0.0, "f0.lkpc"});
  write_manifest(m);
  const auto source = load_dataset(dir);
  REQUIRE_THROWS_MATCHES(source->frame(0), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Err::InvariantViolation; }));
}

TEST_CASE("static room ranges match an independent slab-method oracle") {
  SceneSpec spec = small_room();
  spec.noise_sigma = 0.0;
  spec.waypoints = {{0.3, -0.2, 0.1}};
  const SceneFrameSource source(spec);
  const Pose pose = source.ground_truth().poses[0];
  const PointCloud cloud = source.frame(0);
  REQUIRE(cloud.size() == static_cast<std::size_t>(256) * 64);  // closed box: all beams hit

  const Eigen::Vector3d half = spec.dims / 2.0;
  const double vfov = spec.geometry.vfov_deg * M_PI / 180.0;
  for (std::size_t i = 0; i < cloud.size(); i += 97) {
    const double elev = vfov / 2.0 - vfov * cloud.ring[i] / (spec.geometry.height - 1);
    const double az = 2.0 * M_PI * cloud.col[i] / spec.geometry.width;
    const Eigen::Vector3d dir_sensor(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                                     std::sin(elev));
    const Eigen::Vector3d d = pose.rotation * dir_sensor;
    const Eigen::Vector3d o = pose.translation;

    // Slab method: exit distance from inside the box.
    double t_exit = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (std::abs(d[a]) < 1e-15) continue;
      const double t1 = (-half[a] - o[a]) / d[a];
      const double t2 = (half[a] - o[a]) / d[a];
      t_exit = std::min(t_exit, std::max(t1, t2));
    }
    CHECK(std::abs(static_cast<double>(cloud.range[i]) - t_exit) <
          1e-9 + static_cast<double>(cloud.range[i]) * 1e-6);
    // The stored float is the cast of the double intersection.
    CHECK(cloud.range[i] == static_cast<float>(t_exit));
  }
}

TEST_CASE("generate_scene writes byte-identical datasets per seed") {
  const SceneSpec spec = small_room();
  const fs::path a = temp_dir("scene_a");
  const fs::path b = temp_dir("scene_b");
  generate_scene(spec, a);
  generate_scene(spec, b);
  for (const char* f : {"frame_00000.lkpc", "frame_00001.lkpc", "frame_00002.lkpc", "gt.tum",
                        "frames.txt", "manifest.json"})
    CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("generated datasets load back and satisfy all invariants") {
  const SceneSpec spec = small_room();
  const fs::path dir = temp_dir("roundtrip");
  generate_scene(spec, dir);
  const auto source = load_dataset(dir);
  REQUIRE(source->size() == 3);
  for (std::size_t i = 0; i < source->size(); ++i)
    CHECK(source->frame(i).size() > 0);  // frame() validates invariants on read
  REQUIRE(source->manifest().ground_truth.has_value());
  const Trajectory gt = read_tum(*source->manifest().ground_truth);
  CHECK(gt.size() == source->size());
}

TEST_CASE("trajectories outside the scene are rejected") {
  SceneSpec spec = small_room();
  spec.waypoints = {{0, 0, 0}, {100.0, 0, 0}};
  spec.speed = 50.0;
  spec.n_frames = 20;
  REQUIRE_THROWS_MATCHES(SceneFrameSource(spec), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Err::TrajectoryOutOfBounds;
                         }));
}

TEST_CASE("forest scenes leave no-return pixels for sky rays") {
  SceneSpec spec;
  spec.kind = SceneKind::ForestOfCylinders;
  spec.dims = {30.0, 30.0, 4.0};
  spec.n_frames = 1;
  spec.geometry.width = 256;
  spec.geometry.height = 64;
  spec.seed = 4;
  const SceneFrameSource source(spec);
  const PointCloud cloud = source.frame(0);
  REQUIRE(cloud.size() > 0);
  CHECK(cloud.size() < static_cast<std::size_t>(256) * 64);  // sky misses
  validate_cloud(cloud, spec.geometry);
}

TEST_CASE("scene signal encodes albedo over squared range") {
  SceneSpec spec = small_room();
  spec.noise_sigma = 0.0;
  spec.waypoints = {{0, 0, 0}};
  const SceneFrameSource source(spec);
  const PointCloud cloud = source.frame(0);
  // signal * r^2 must equal one of the two albedo levels (up to the fixed
  // scale constant).
  for (std::size_t i = 0; i < cloud.size(); i += 53) {
    const double r2 = std::max(static_cast<double>(cloud.range[i]) * cloud.range[i], 0.25);
    const double albedo = static_cast<double>(cloud.signal[i]) * r2 / 10000.0;
    const bool lo = std::abs(albedo - spec.albedo_lo) < 0.15;
    const bool hi = std::abs(albedo - spec.albedo_hi) < 0.15;
    CHECK((lo || hi));
  }
}
