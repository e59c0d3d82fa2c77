#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "lkp/common.hpp"
#include "lkp/matching.hpp"

namespace lkp {

struct Homography {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();  // h(2,2) normalized to 1

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const {
    const Eigen::Vector3d q = h * p.homogeneous();
    return q.hnormalized();
  }
};

struct RansacParams {
  double reproj_threshold_px = 3.0;
  int max_iterations = 2000;
  double confidence = 0.995;
  std::uint64_t seed = 7;
};

struct RansacResult {
  Homography h;
  std::vector<bool> inlier_mask;
  int inlier_count = 0;
};

namespace detail {

struct PointNormalization {
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
};

// Hartley normalization: centroid to origin, mean distance sqrt(2).
inline PointNormalization normalize_points(const std::vector<Eigen::Vector2d>& pts,
                                           std::vector<Eigen::Vector2d>& out) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  const double s = dist > 1e-12 ? std::sqrt(2.0) / dist : 1.0;

  PointNormalization n;
  n.t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  out.resize(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) out[i] = s * (pts[i] - mean);
  return n;
}

// Normalized DLT from >= 4 correspondences: the right singular vector of the
// 2n x 9 design matrix, denormalized and scaled so h22 = 1.
inline bool dlt_homography(const std::vector<Eigen::Vector2d>& a,
                           const std::vector<Eigen::Vector2d>& b, Homography& out) {
  std::vector<Eigen::Vector2d> an, bn;
  const PointNormalization na = normalize_points(a, an);
  const PointNormalization nb = normalize_points(b, bn);

  Eigen::MatrixXd m(2 * static_cast<int>(a.size()), 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = an[i].x(), y = an[i].y();
    const double u = bn[i].x(), v = bn[i].y();
    m.row(2 * static_cast<int>(i)) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    m.row(2 * static_cast<int>(i) + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

  Eigen::Matrix3d full = nb.t.inverse() * hn * na.t;
  if (std::abs(full(2, 2)) < 1e-12) return false;
  full /= full(2, 2);
  if (std::abs(full.determinant()) < 1e-12) return false;
  out.h = full;
  return true;
}

// Fast minimal-sample solve for the RANSAC loop: fix h22 = 1 and solve the
// 8x8 linear system directly (an order of magnitude cheaper than the SVD
// route; hypotheses near h22 = 0 are simply skipped, the refit uses the full
// DLT).
inline bool homography_from_4(const Eigen::Vector2d a[4], const Eigen::Vector2d b[4],
                              Homography& out) {
  Eigen::Matrix<double, 8, 8> m;
  Eigen::Matrix<double, 8, 1> rhs;
  for (int i = 0; i < 4; ++i) {
    const double x = a[i].x(), y = a[i].y();
    const double u = b[i].x(), v = b[i].y();
    m.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    m.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    rhs(2 * i) = u;
    rhs(2 * i + 1) = v;
  }
  Eigen::PartialPivLU<Eigen::Matrix<double, 8, 8>> lu(m);
  // PartialPivLU has no rank query; reject near-singular systems by
  // checking the residual of the solve.
  const Eigen::Matrix<double, 8, 1> h = lu.solve(rhs);
  if (!h.allFinite()) return false;
  if ((m * h - rhs).cwiseAbs().maxCoeff() > 1e-6 * std::max(1.0, rhs.cwiseAbs().maxCoeff()))
    return false;
  out.h << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  if (std::abs(out.h.determinant()) < 1e-12) return false;
  return true;
}

inline bool collinear(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                      const Eigen::Vector2d& c) {
  const Eigen::Vector2d u = b - a, v = c - a;
  const double cross = u.x() * v.y() - u.y() * v.x();
  return std::abs(cross) < 1e-9 * (u.norm() * v.norm() + 1e-12);
}

inline bool degenerate_sample(const std::vector<Eigen::Vector2d>& p, const int idx[4]) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k)
        if (collinear(p[static_cast<std::size_t>(idx[i])], p[static_cast<std::size_t>(idx[j])],
                      p[static_cast<std::size_t>(idx[k])]))
          return true;
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// RANSAC homography with symmetric transfer error (a point is an inlier when
// both the forward and the backward reprojection land within the threshold).
// The winning model is re-fit to all its inliers with the normalized DLT and
// the mask recomputed once against the refit model.
inline RansacResult estimate_homography_ransac(const std::vector<Eigen::Vector2d>& pts_a,
                                               const std::vector<Eigen::Vector2d>& pts_b,
                                               const RansacParams& params = {}) {
  if (pts_a.size() != pts_b.size())
    fail(Err::InvariantViolation, "point lists must have equal length");
  const std::size_t n = pts_a.size();
  if (n < 4) fail(Err::TooFewPoints, "homography needs >= 4 correspondences");

  Pcg32 rng(params.seed);
  const double thr = params.reproj_threshold_px;

  auto count_inliers = [&](const Homography& h, std::vector<bool>* mask) {
    const Eigen::Matrix3d hinv = h.h.inverse();
    int count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d f = h.h * pts_a[i].homogeneous();
      const Eigen::Vector3d g = hinv * pts_b[i].homogeneous();
      bool ok = false;
      if (std::abs(f.z()) > 1e-12 && std::abs(g.z()) > 1e-12) {
        const double ef = (f.hnormalized() - pts_b[i]).norm();
        const double eb = (g.hnormalized() - pts_a[i]).norm();
        ok = std::max(ef, eb) < thr;
      }
      if (mask) (*mask)[i] = ok;
      if (ok) ++count;
    }
    return count;
  };

  Homography best;
  int best_count = -1;
  bool found = false;
  int iterations_needed = params.max_iterations;
  for (int it = 0; it < std::min(iterations_needed, params.max_iterations); ++it) {
    int idx[4];
    for (int k = 0; k < 4;) {
      const int c = static_cast<int>(rng.bounded(static_cast<std::uint32_t>(n)));
      bool dup = false;
      for (int j = 0; j < k; ++j) dup |= (idx[j] == c);
      if (!dup) idx[k++] = c;
    }
    if (detail::degenerate_sample(pts_a, idx) || detail::degenerate_sample(pts_b, idx)) continue;

    Eigen::Vector2d sa[4], sb[4];
    for (int k = 0; k < 4; ++k) {
      sa[k] = pts_a[static_cast<std::size_t>(idx[k])];
      sb[k] = pts_b[static_cast<std::size_t>(idx[k])];
    }
    Homography h;
    if (!detail::homography_from_4(sa, sb, h)) continue;

    const int count = count_inliers(h, nullptr);
    if (count > best_count) {
      best_count = count;
      best = h;
      found = true;
      // Adaptive iteration bound from the current inlier ratio.
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double p_outlier_free = std::pow(w, 4);
      if (p_outlier_free > 1e-12) {
        const double denom = std::log(1.0 - std::min(p_outlier_free, 1.0 - 1e-12));
        iterations_needed =
            static_cast<int>(std::ceil(std::log(1.0 - params.confidence) / denom));
        iterations_needed = std::clamp(iterations_needed, it + 1, params.max_iterations);
      }
    }
  }
  if (!found || best_count < 4)
    fail(Err::DegenerateConfiguration, "no non-degenerate 4-sample produced a model");

  // Refit on all inliers of the best hypothesis, then recompute the mask.
  RansacResult result;
  result.inlier_mask.assign(n, false);
  count_inliers(best, &result.inlier_mask);
  std::vector<Eigen::Vector2d> ia, ib;
  for (std::size_t i = 0; i < n; ++i) {
    if (result.inlier_mask[i]) {
      ia.push_back(pts_a[i]);
      ib.push_back(pts_b[i]);
    }
  }
  Homography refit;
  if (ia.size() >= 4 && detail::dlt_homography(ia, ib, refit)) best = refit;
  result.h = best;
  result.inlier_count = count_inliers(best, &result.inlier_mask);
  return result;
}

// ---------------------------------------------------------------------------
// Match Score: RANSAC inliers / total matches. Returns 0 for fewer than 4
// matches or a degenerate model; `degenerate` reports which happened.
inline double match_score(const std::vector<MatchPair>& matches,
                          const std::vector<Keypoint>& kps_a, const std::vector<Keypoint>& kps_b,
                          const RansacParams& params = {}, bool* degenerate = nullptr) {
  if (degenerate) *degenerate = false;
  if (matches.size() < 4) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  std::vector<Eigen::Vector2d> pa, pb;
  pa.reserve(matches.size());
  pb.reserve(matches.size());
  for (const MatchPair& m : matches) {
    const Keypoint& ka = kps_a[static_cast<std::size_t>(m.idx_a)];
    const Keypoint& kb = kps_b[static_cast<std::size_t>(m.idx_b)];
    pa.emplace_back(ka.x, ka.y);
    pb.emplace_back(kb.x, kb.y);
  }
  try {
    const RansacResult r = estimate_homography_ransac(pa, pb, params);
    return static_cast<double>(r.inlier_count) / static_cast<double>(matches.size());
  } catch (const Error&) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
}

}  // namespace lkp
