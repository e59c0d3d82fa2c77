#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "lkp/common.hpp"
#include "lkp/se3.hpp"

namespace lkp {

// Ordered pose sequence with strictly increasing timestamps.
struct Trajectory {
  std::vector<Pose> poses;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }

  void validate() const {
    for (std::size_t i = 1; i < poses.size(); ++i)
      if (!(poses[i].timestamp > poses[i - 1].timestamp))
        fail(Err::InvariantViolation,
             "timestamps not strictly increasing at pose " + std::to_string(i));
  }
};

struct ErrorReport {
  double trans_mean = 0.0;    // m
  double trans_rmse = 0.0;    // m
  double rot_mean_deg = 0.0;  // deg
  std::size_t n_pairs = 0;
  double odom_rate_hz = 0.0;
  double avg_points = 0.0;    // from the odometry log, when provided
};

// ---------------------------------------------------------------------------
// associate: greedy one-to-one nearest-timestamp pairing within max_dt,
// advancing through both trajectories in time order.
inline std::vector<std::pair<Pose, Pose>> associate(const Trajectory& est, const Trajectory& gt,
                                                    double max_dt = 0.05) {
  if (est.empty() || gt.empty()) fail(Err::NoOverlap, "empty trajectory");
  std::vector<std::pair<Pose, Pose>> pairs;
  std::size_t j = 0;
  for (const Pose& e : est.poses) {
    while (j + 1 < gt.size() && std::abs(gt.poses[j + 1].timestamp - e.timestamp) <=
                                    std::abs(gt.poses[j].timestamp - e.timestamp))
      ++j;
    if (std::abs(gt.poses[j].timestamp - e.timestamp) <= max_dt) {
      pairs.emplace_back(e, gt.poses[j]);
      ++j;  // one-to-one
      if (j >= gt.size()) break;
    }
  }
  if (pairs.empty()) fail(Err::NoOverlap, "no pose pairs within max_dt");
  return pairs;
}

// ---------------------------------------------------------------------------
// align_umeyama: closed-form rigid transform (no scale) minimizing
// sum ||G * t_est - t_gt||^2 over the associated translations. SVD of the
// cross-covariance with determinant sign correction.
inline Pose align_umeyama(const std::vector<std::pair<Pose, Pose>>& pairs) {
  if (pairs.size() < 3) fail(Err::DegenerateGeometry, "alignment needs >= 3 pose pairs");

  Eigen::Vector3d mean_e = Eigen::Vector3d::Zero(), mean_g = Eigen::Vector3d::Zero();
  for (const auto& [e, g] : pairs) {
    mean_e += e.translation;
    mean_g += g.translation;
  }
  mean_e /= static_cast<double>(pairs.size());
  mean_g /= static_cast<double>(pairs.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double spread = 0.0;
  for (const auto& [e, g] : pairs) {
    cov += (g.translation - mean_g) * (e.translation - mean_e).transpose();
    spread += (e.translation - mean_e).squaredNorm();
  }
  cov /= static_cast<double>(pairs.size());

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  // Collinear or coincident translations leave a rotation about the
  // dominant axis unconstrained.
  if (spread < 1e-18 || sv(1) < 1e-12 * std::max(sv(0), 1e-300))
    fail(Err::DegenerateGeometry, "pose translations are collinear or coincident");

  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) s(2, 2) = -1.0;

  Pose g;
  g.rotation = svd.matrixU() * s * svd.matrixV().transpose();
  g.translation = mean_g - g.rotation * mean_e;
  return g;
}

// ---------------------------------------------------------------------------
struct EvalOptions {
  double max_dt = 0.05;
  bool align = true;
  double avg_points = 0.0;  // pass-through from the odometry log
};

// compute_errors: absolute per-pair translation errors after (optional)
// Umeyama alignment, geodesic rotation errors in degrees, and the odometry
// rate over the estimated trajectory's time span.
inline ErrorReport compute_errors(const Trajectory& est, const Trajectory& gt,
                                  const EvalOptions& opts = {}) {
  const auto pairs = associate(est, gt, opts.max_dt);
  Pose g = Pose::identity();
  if (opts.align) g = align_umeyama(pairs);

  KahanSum sum, sum_sq, rot_sum;
  for (const auto& [e, t] : pairs) {
    const Eigen::Vector3d aligned = g.rotation * e.translation + g.translation;
    const double err = (aligned - t.translation).norm();
    sum.add(err);
    sum_sq.add(err * err);

    const Eigen::Matrix3d r_aligned = g.rotation * e.rotation;
    // Exact-equality fast path keeps identical trajectories at exactly zero
    // (acos near 1 would otherwise amplify representation noise).
    if ((r_aligned - t.rotation).cwiseAbs().maxCoeff() == 0.0) {
      rot_sum.add(0.0);
    } else {
      const double c = ((t.rotation.transpose() * r_aligned).trace() - 1.0) * 0.5;
      rot_sum.add(std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / 3.14159265358979323846);
    }
  }

  ErrorReport rep;
  rep.n_pairs = pairs.size();
  const double n = static_cast<double>(pairs.size());
  rep.trans_mean = sum.value() / n;
  rep.trans_rmse = std::sqrt(sum_sq.value() / n);
  rep.rot_mean_deg = rot_sum.value() / n;
  const double span = est.poses.back().timestamp - est.poses.front().timestamp;
  rep.odom_rate_hz = (est.size() > 1 && span > 0.0)
                         ? static_cast<double>(est.size() - 1) / span
                         : 0.0;
  rep.avg_points = opts.avg_points;
  return rep;
}

}  // namespace lkp
