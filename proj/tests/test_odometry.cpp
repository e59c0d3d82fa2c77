#include <catch2/catch_amalgamated.hpp>

#include "lkp/odometry.hpp"
#include "helpers.hpp"

using namespace lkp;

namespace {

// Three orthogonal textured planes meeting in a corner; constrains all six
// degrees of freedom.
PointCloud corner_cloud(double pitch = 0.05, double extent = 2.0) {
  PointCloud cloud;
  std::uint16_t col = 0, ring = 0;
  auto add = [&](float x, float y, float z) {
    cloud.push_back({x, y, z}, 0.0f, 1.0f, ring, col);
    if (++col == 0) ++ring;
  };
  const int n = static_cast<int>(extent / pitch);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const float a = static_cast<float>(i * pitch), b = static_cast<float>(j * pitch);
      add(a, b, 0.0f);
      add(a, 0.0f, b);
      add(0.0f, a, b);
    }
  }
  return cloud;
}

Pose make_pose(double yaw_deg, const Eigen::Vector3d& t) {
  Pose p;
  p.rotation =
      Eigen::AngleAxisd(yaw_deg * 3.14159265358979323846 / 180.0, Eigen::Vector3d::UnitZ())
          .toRotationMatrix();
  p.translation = t;
  return p;
}

PointCloud transform_cloud(const PointCloud& in, const Pose& pose) {
  PointCloud out = in;
  for (auto& p : out.points) p = (pose.rotation.cast<float>() * p) + pose.translation.cast<float>();
  return out;
}

VoxelMap map_of(const PointCloud& cloud, const IcpParams& params) {
  VoxelMap map(params.voxel_size, params.max_points_per_voxel);
  for (const auto& p : cloud.points) map.insert(p.cast<double>());
  return map;
}

}  // namespace

TEST_CASE("voxel_downsample keeps the lower-index point per voxel") {
  PointCloud cloud;
  cloud.push_back({0.05f, 0.05f, 0.05f}, 1, 1, 0, 0);
  cloud.push_back({0.15f, 0.05f, 0.05f}, 2, 1, 0, 1);  // same 0.2 m voxel
  cloud.push_back({0.35f, 0.05f, 0.05f}, 3, 1, 0, 2);
  const PointCloud out = voxel_downsample(cloud, 0.2);
  REQUIRE(out.size() == 2);
  CHECK(out.signal[0] == 1.0f);
  CHECK(out.signal[1] == 3.0f);
}

TEST_CASE("voxel_downsample keeps grid-separated points") {
  PointCloud cloud;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      cloud.push_back({static_cast<float>(i), static_cast<float>(j), 0.0f}, 0, 1,
                      static_cast<std::uint16_t>(i), static_cast<std::uint16_t>(j));
  CHECK(voxel_downsample(cloud, 0.2).size() == 25);
}

TEST_CASE("voxel_downsample respects the voxel-count bound") {
  const PointCloud cloud = test::random_cloud(10000, 3, 1.0);  // 2 m cube
  const PointCloud out = voxel_downsample(cloud, 0.2);
  CHECK(out.size() <= 1000 + 331);  // 10^3 interior voxels plus boundary slack
  CHECK(out.size() > 100);
}

TEST_CASE("voxel map insertion is idempotent and capped") {
  VoxelMap map(0.2, 5);
  const Eigen::Vector3d p(0.05, 0.05, 0.05);
  for (int i = 0; i < 10; ++i) map.insert(p);
  CHECK(map.point_count() == 1);
  for (int i = 0; i < 10; ++i)
    map.insert(Eigen::Vector3d(0.01 + 0.015 * i, 0.05, 0.05));  // same voxel
  CHECK(map.point_count() <= 5);
}

TEST_CASE("register_frame returns identity for an exactly aligned frame") {
  const PointCloud cloud = corner_cloud();
  IcpParams params;
  const VoxelMap map = map_of(cloud, params);
  RegistrationStats stats;
  const Pose result = register_frame(map, voxel_downsample(cloud, params.voxel_size),
                                     Pose::identity(), params, 2.0, &stats);
  CHECK(result.translation.norm() < 1e-9);
  CHECK(Pose::identity().rotation_angle_to(result) < 1e-9);
  CHECK_FALSE(stats.degenerate);
}

TEST_CASE("register_frame recovers a planted yaw and translation") {
  const PointCloud map_cloud = corner_cloud();
  IcpParams params;
  const VoxelMap map = map_of(map_cloud, params);

  // Sensor moved by G: the observed frame is G^-1 applied to the map.
  const Pose g = make_pose(5.0, {0.1, 0.0, 0.0});
  const PointCloud frame = voxel_downsample(transform_cloud(map_cloud, g.inverse()), params.voxel_size);

  const Pose result = register_frame(map, frame, Pose::identity(), params, 2.0);
  CHECK((result.translation - g.translation).norm() < 1e-3);
  CHECK(g.rotation_angle_to(result) * 180.0 / 3.14159265358979323846 < 0.01);
}

TEST_CASE("register_frame is equivariant under a rigid transform") {
  const PointCloud map_cloud = corner_cloud(0.08, 1.6);
  IcpParams params;
  params.convergence_eps = 1e-9;

  const Pose g_motion = make_pose(4.0, {0.08, -0.03, 0.02});
  const PointCloud frame =
      voxel_downsample(transform_cloud(map_cloud, g_motion.inverse()), params.voxel_size);
  const VoxelMap map = map_of(map_cloud, params);
  const Pose base = register_frame(map, frame, Pose::identity(), params, 2.0);

  Pcg32 rng(4);
  Pose g = make_pose(rng.uniform(-90.0, 90.0),
                     {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)});
  const PointCloud map_g = transform_cloud(map_cloud, g);
  const PointCloud frame_g = transform_cloud(frame, g);
  const VoxelMap mapg = map_of(map_g, params);
  const Pose conj = register_frame(mapg, frame_g, g * Pose::identity() * g.inverse(), params, 2.0);

  const Pose want = g * base * g.inverse();
  CHECK((conj.translation - want.translation).norm() < 1e-6);
  CHECK(want.rotation_angle_to(conj) < 1e-6);
}

TEST_CASE("register_frame keeps the rotation orthonormal") {
  const PointCloud map_cloud = corner_cloud();
  IcpParams params;
  const VoxelMap map = map_of(map_cloud, params);
  const Pose g = make_pose(3.0, {0.05, 0.02, 0.0});
  const PointCloud frame =
      voxel_downsample(transform_cloud(map_cloud, g.inverse()), params.voxel_size);
  const Pose result = register_frame(map, frame, Pose::identity(), params, 2.0);
  const Eigen::Matrix3d rtr = result.rotation.transpose() * result.rotation;
  CHECK((rtr - Eigen::Matrix3d::Identity()).norm() < 1e-9);
  CHECK(std::abs(result.rotation.determinant() - 1.0) < 1e-9);
}

TEST_CASE("register_frame returns the prediction when nothing corresponds") {
  const PointCloud map_cloud = corner_cloud();
  IcpParams params;
  const VoxelMap map = map_of(map_cloud, params);
  PointCloud far = map_cloud;
  for (auto& p : far.points) p += Eigen::Vector3f(100.0f, 100.0f, 100.0f);
  const Pose pred = make_pose(1.0, {0.7, 0.3, 0.1});
  RegistrationStats stats;
  const Pose result =
      register_frame(map, voxel_downsample(far, params.voxel_size), pred, params, 2.0, &stats);
  CHECK(stats.degenerate);
  CHECK((result.translation - pred.translation).norm() == 0.0);
}

TEST_CASE("static scene keeps the trajectory at identity") {
  const PointCloud cloud = corner_cloud();
  Odometry odom;
  for (int i = 0; i < 10; ++i) {
    PointCloud frame = cloud;
    frame.timestamp = 0.1 * i;
    odom.process(frame);
  }
  REQUIRE(odom.poses().size() == 10);
  for (const Pose& p : odom.poses()) {
    CHECK(p.translation.norm() < 1e-6);
    CHECK(Pose::identity().rotation_angle_to(p) < 1e-6);
  }
}

TEST_CASE("icp residual is non-increasing on noiseless data") {
  // One Gauss-Newton step at a time against a fixed map, watching the mean
  // squared correspondence distance.
  const PointCloud map_cloud = corner_cloud();
  IcpParams params;
  const VoxelMap map = map_of(map_cloud, params);
  const Pose g = make_pose(4.0, {0.08, 0.0, 0.0});
  const PointCloud frame =
      voxel_downsample(transform_cloud(map_cloud, g.inverse()), params.voxel_size);

  auto residual = [&](const Pose& pose) {
    double acc = 0.0;
    int n = 0;
    for (const auto& pf : frame.points) {
      const Eigen::Vector3d world = pose.apply(pf.cast<double>());
      Eigen::Vector3d target;
      if (map.nearest(world, 2.0, target)) {
        acc += (world - target).squaredNorm();
        ++n;
      }
    }
    return n ? acc / n : 0.0;
  };

  IcpParams one_step = params;
  one_step.max_iterations = 1;
  one_step.convergence_eps = 0.0;
  Pose pose;
  pose.timestamp = frame.timestamp;
  double prev = residual(pose);
  for (int it = 0; it < 12; ++it) {
    pose = register_frame(map, frame, pose, one_step, 2.0);
    const double cur = residual(pose);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("constant velocity prediction extrapolates the last motion") {
  Odometry odom;
  // Feed two poses via a moving corner scene and check the extrapolation.
  const PointCloud base = corner_cloud();
  for (int i = 0; i < 2; ++i) {
    PointCloud frame = transform_cloud(base, make_pose(0.0, {-0.1 * i, 0, 0}));
    frame.timestamp = 0.1 * i;
    odom.process(frame);
  }
  const Pose pred = odom.predict(0.2);
  // Sensor advanced +0.1 m in x per frame (the frame content moved -x).
  CHECK(pred.translation.x() == Catch::Approx(0.2).margin(2e-2));
}
