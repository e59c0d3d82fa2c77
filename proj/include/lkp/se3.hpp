#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace lkp {

// Rigid body pose. Composition and inverse follow the usual SE(3) rules;
// orthonormality is restored explicitly after iterative updates.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double timestamp = 0.0;

  static Pose identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  Pose inverse() const {
    Pose out;
    out.rotation = rotation.transpose();
    out.translation = -(out.rotation * translation);
    out.timestamp = timestamp;
    return out;
  }

  Pose operator*(const Pose& o) const {
    Pose out;
    out.rotation = rotation * o.rotation;
    out.translation = rotation * o.translation + translation;
    out.timestamp = o.timestamp;
    return out;
  }

  // Nearest orthonormal rotation by polar decomposition (SVD with
  // determinant sign fix).
  void reorthonormalize() {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
      Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
      flip(2, 2) = -1.0;
      r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    rotation = r;
  }

  // Geodesic rotation angle to another pose, radians.
  double rotation_angle_to(const Pose& o) const {
    const double c = ((rotation.transpose() * o.rotation).trace() - 1.0) * 0.5;
    return std::acos(std::clamp(c, -1.0, 1.0));
  }
};

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Rodrigues' formula.
inline Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  if (theta < 1e-12) return Eigen::Matrix3d::Identity() + skew(w);
  const Eigen::Matrix3d k = skew(w / theta);
  return Eigen::Matrix3d::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

// Left-multiplicative SE(3) update from a 6-vector [rotation, translation].
inline Pose se3_update(const Eigen::Matrix<double, 6, 1>& dx, const Pose& t) {
  Pose delta;
  delta.rotation = so3_exp(dx.head<3>());
  delta.translation = dx.tail<3>();
  Pose out = delta * t;
  out.timestamp = t.timestamp;
  out.reorthonormalize();
  return out;
}

}  // namespace lkp
