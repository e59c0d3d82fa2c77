#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "lkp/point_cloud.hpp"
#include "lkp/se3.hpp"

namespace lkp {

struct IcpParams {
  double voxel_size = 0.2;        // map and frame downsampling cell, meters
  int max_points_per_voxel = 20;
  int max_iterations = 100;
  double convergence_eps = 1e-4;
  double initial_threshold = 2.0;  // adaptive correspondence threshold seed
  double threshold_floor = 0.1;
  double max_range = 50.0;
  double min_motion = 0.01;       // deviations below this don't update the model
  int min_correspondences = 20;
};

// ---------------------------------------------------------------------------
// voxel_downsample: keep the first point (in index order) of every occupied
// voxel. Deterministic and field-preserving.
inline PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (voxel <= 0.0) fail(Err::InvariantViolation, "voxel size must be positive");
  std::unordered_map<std::uint64_t, bool> seen;
  seen.reserve(cloud.size());
  std::vector<std::int32_t> keep;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3f& p = cloud.points[i];
    const auto vx = static_cast<std::int64_t>(std::floor(p.x() / voxel));
    const auto vy = static_cast<std::int64_t>(std::floor(p.y() / voxel));
    const auto vz = static_cast<std::int64_t>(std::floor(p.z() / voxel));
    const std::uint64_t key = (static_cast<std::uint64_t>(vx) * 73856093ULL) ^
                              (static_cast<std::uint64_t>(vy) * 19349669ULL) ^
                              (static_cast<std::uint64_t>(vz) * 83492791ULL);
    if (!seen.emplace(key, true).second) continue;
    keep.push_back(static_cast<std::int32_t>(i));
  }
  return cloud.subset(keep);
}

// ---------------------------------------------------------------------------
// Voxel hash map of the accumulated world-frame points. Search enumerates
// the voxel neighbourhood covered by the query radius, so lookups stay exact
// for any correspondence threshold.
class VoxelMap {
 public:
  explicit VoxelMap(double voxel_size, int max_points_per_voxel)
      : voxel_(voxel_size), cap_(max_points_per_voxel) {}

  bool empty() const { return cells_.empty(); }
  std::size_t cell_count() const { return cells_.size(); }

  std::size_t point_count() const {
    std::size_t n = 0;
    for (const auto& [k, c] : cells_) n += c.size();
    return n;
  }

  // Insertion is capped per voxel and idempotent for exactly duplicated
  // points.
  void insert(const Eigen::Vector3d& p) {
    auto& cell = cells_[key_of(voxel_index(p))];
    if (static_cast<int>(cell.size()) >= cap_) return;
    for (const Eigen::Vector3d& q : cell)
      if (q == p) return;
    cell.push_back(p);
  }

  void insert(const std::vector<Eigen::Vector3d>& pts) {
    for (const auto& p : pts) insert(p);
  }

  // Nearest stored point strictly within `radius` of the query; false if
  // none. Equidistant candidates resolve to the first in scan order, which
  // is fixed, so lookups are deterministic.
  bool nearest(const Eigen::Vector3d& query, double radius, Eigen::Vector3d& out) const {
    const Eigen::Vector3i base = voxel_index(query);
    const int reach = std::min(static_cast<int>(std::ceil(radius / voxel_)), 24);
    double best = radius * radius;
    bool found = false;
    for (int dz = -reach; dz <= reach; ++dz) {
      for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
          const auto it = cells_.find(key_of(base + Eigen::Vector3i(dx, dy, dz)));
          if (it == cells_.end()) continue;
          for (const Eigen::Vector3d& q : it->second) {
            const double d2 = (q - query).squaredNorm();
            if (d2 < best) {
              best = d2;
              out = q;
              found = true;
            }
          }
        }
      }
    }
    return found;
  }

  // Drop voxels whose anchor point lies beyond `range` of `center`.
  void trim(const Eigen::Vector3d& center, double range) {
    const double r2 = range * range;
    for (auto it = cells_.begin(); it != cells_.end();) {
      if (!it->second.empty() && (it->second.front() - center).squaredNorm() > r2)
        it = cells_.erase(it);
      else
        ++it;
    }
  }

 private:
  Eigen::Vector3i voxel_index(const Eigen::Vector3d& p) const {
    return {static_cast<int>(std::floor(p.x() / voxel_)),
            static_cast<int>(std::floor(p.y() / voxel_)),
            static_cast<int>(std::floor(p.z() / voxel_))};
  }

  static std::uint64_t key_of(const Eigen::Vector3i& v) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.x())) * 73856093ULL) ^
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.y())) * 19349669ULL) ^
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.z())) * 83492791ULL);
  }

  double voxel_;
  int cap_;
  std::unordered_map<std::uint64_t, std::vector<Eigen::Vector3d>> cells_;
};

// ---------------------------------------------------------------------------
// Adaptive correspondence threshold: a running RMS of the deviation between
// the constant-velocity prediction and the registered result, floored and
// seeded like the reference method.
class AdaptiveThreshold {
 public:
  explicit AdaptiveThreshold(const IcpParams& params) : params_(params) {}

  double current() const {
    if (n_samples_ == 0) return params_.initial_threshold;
    return std::max(std::sqrt(sse_ / static_cast<double>(n_samples_)), params_.threshold_floor);
  }

  void update(const Pose& prediction, const Pose& result) {
    const Pose dev = prediction.inverse() * result;
    const double angle = Pose::identity().rotation_angle_to(dev);
    const double rot_err = 2.0 * params_.max_range * std::sin(0.5 * angle);
    const double err = dev.translation.norm() + rot_err;
    if (err > params_.min_motion) {
      sse_ += err * err;
      ++n_samples_;
    }
  }

 private:
  IcpParams params_;
  double sse_ = 0.0;
  std::size_t n_samples_ = 0;
};

struct RegistrationStats {
  int iterations = 0;
  int correspondences = 0;
  bool degenerate = false;
};

// ---------------------------------------------------------------------------
// register_frame: robust point-to-point ICP against the voxel map.
// Each iteration finds within-threshold nearest neighbours, solves the
// Geman-McClure-weighted least squares for the SE(3) increment by
// Gauss-Newton and re-orthonormalizes. Fewer than min_correspondences at
// any iteration returns the prediction unchanged, flagged degenerate.
inline Pose register_frame(const VoxelMap& map, const PointCloud& frame, const Pose& prediction,
                           const IcpParams& params, double threshold,
                           RegistrationStats* stats = nullptr) {
  Pose pose = prediction;
  pose.timestamp = frame.timestamp;
  if (map.empty()) return pose;

  const double kernel = threshold / 3.0;
  const double kernel2 = kernel * kernel;

  std::vector<Eigen::Vector3d> source(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) source[i] = frame.points[i].cast<double>();

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    int n_corr = 0;

    for (const Eigen::Vector3d& p : source) {
      const Eigen::Vector3d world = pose.apply(p);
      Eigen::Vector3d target;
      if (!map.nearest(world, threshold, target)) continue;
      const Eigen::Vector3d residual = world - target;
      // Geman-McClure weight with scale = threshold / 3.
      const double denom = kernel2 + residual.squaredNorm();
      const double w = (kernel2 / denom) * (kernel2 / denom);
      // J = [ -[world]x | I ] for the left-multiplicative update.
      Eigen::Matrix<double, 3, 6> jac;
      jac.block<3, 3>(0, 0) = -skew(world);
      jac.block<3, 3>(0, 3) = Eigen::Matrix3d::Identity();
      jtj.noalias() += jac.transpose() * (w * jac);
      jtr.noalias() += jac.transpose() * (w * residual);
      ++n_corr;
    }

    if (stats) {
      stats->iterations = iter + 1;
      stats->correspondences = n_corr;
    }
    if (n_corr < params.min_correspondences) {
      if (stats) stats->degenerate = true;
      Pose out = prediction;
      out.timestamp = frame.timestamp;
      return out;
    }

    const Eigen::Matrix<double, 6, 1> dx = jtj.ldlt().solve(-jtr);
    if (!dx.allFinite()) {
      // Rank-deficient normal equations (degenerate geometry).
      if (stats) stats->degenerate = true;
      Pose out = prediction;
      out.timestamp = frame.timestamp;
      return out;
    }
    pose = se3_update(dx, pose);
    if (dx.norm() < params.convergence_eps) break;
  }
  return pose;
}

// ---------------------------------------------------------------------------
// Frame-to-map odometry loop with constant-velocity prediction.
struct OdometryFrameLog {
  std::size_t frame = 0;
  std::size_t points_in = 0;
  std::size_t points_registered = 0;
  int iterations = 0;
  bool degenerate = false;
  double ms = 0.0;
};

struct OdometryResult {
  std::vector<Pose> trajectory;
  std::vector<OdometryFrameLog> log;
};

class Odometry {
 public:
  explicit Odometry(const IcpParams& params = {})
      : params_(params), map_(params.voxel_size, params.max_points_per_voxel),
        threshold_(params) {}

  const std::vector<Pose>& poses() const { return poses_; }
  const VoxelMap& map() const { return map_; }

  Pose predict(double timestamp) const {
    Pose pred;
    if (poses_.size() >= 2) {
      const Pose& last = poses_[poses_.size() - 1];
      const Pose& prev = poses_[poses_.size() - 2];
      pred = last * (prev.inverse() * last);
    } else if (!poses_.empty()) {
      pred = poses_.back();
    }
    pred.timestamp = timestamp;
    return pred;
  }

  OdometryFrameLog process(const PointCloud& cloud) {
    const auto t0 = std::chrono::steady_clock::now();
    OdometryFrameLog log;
    log.frame = poses_.size();
    log.points_in = cloud.size();

    const PointCloud frame = voxel_downsample(cloud, params_.voxel_size);
    log.points_registered = frame.size();

    const Pose pred = predict(cloud.timestamp);
    Pose pose;
    if (poses_.empty()) {
      pose.timestamp = cloud.timestamp;
    } else {
      RegistrationStats stats;
      pose = register_frame(map_, frame, pred, params_, threshold_.current(), &stats);
      log.iterations = stats.iterations;
      log.degenerate = stats.degenerate;
      if (!stats.degenerate) threshold_.update(pred, pose);
    }

    std::vector<Eigen::Vector3d> world(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i)
      world[i] = pose.apply(frame.points[i].cast<double>());
    map_.insert(world);
    map_.trim(pose.translation, params_.max_range);
    poses_.push_back(pose);

    log.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                 .count();
    return log;
  }

 private:
  IcpParams params_;
  VoxelMap map_;
  AdaptiveThreshold threshold_;
  std::vector<Pose> poses_;
};

}  // namespace lkp
