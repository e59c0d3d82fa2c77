#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "lkp/common.hpp"

namespace lkp {

// Native panoramic geometry of the sensor. Defaults to an OS0-128-class
// spinning device: 2048 columns over 360 deg, 128 rings over 90 deg vertical.
struct SensorGeometry {
  int width = 2048;
  int height = 128;
  double vfov_deg = 90.0;
  double max_range_m = 50.0;
};

// One LiDAR sweep. Per-point signal (return strength, sensor counts) and
// range (meters), plus the beam index (ring = row, col = azimuth step) the
// point was measured at. range == 0 marks a no-return entry.
struct PointCloud {
  std::vector<Eigen::Vector3f> points;
  std::vector<float> signal;
  std::vector<float> range;
  std::vector<std::uint16_t> ring;
  std::vector<std::uint16_t> col;
  double timestamp = 0.0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void reserve(std::size_t n) {
    points.reserve(n);
    signal.reserve(n);
    range.reserve(n);
    ring.reserve(n);
    col.reserve(n);
  }

  void push_back(const Eigen::Vector3f& p, float sig, float rng, std::uint16_t r,
                 std::uint16_t c) {
    points.push_back(p);
    signal.push_back(sig);
    range.push_back(rng);
    ring.push_back(r);
    col.push_back(c);
  }

  // Sub-cloud from a sorted list of point indices; all per-point fields are
  // carried over bit-exactly.
  PointCloud subset(const std::vector<std::int32_t>& indices) const {
    PointCloud out;
    out.timestamp = timestamp;
    out.reserve(indices.size());
    for (std::int32_t i : indices) {
      out.push_back(points[static_cast<std::size_t>(i)], signal[static_cast<std::size_t>(i)],
                    range[static_cast<std::size_t>(i)], ring[static_cast<std::size_t>(i)],
                    col[static_cast<std::size_t>(i)]);
    }
    return out;
  }
};

// Checks the PointCloud invariants; throws InvariantViolation naming the
// first offending point. `frame_index` is only used in the message.
inline void validate_cloud(const PointCloud& cloud, const SensorGeometry& geom,
                           long frame_index = -1) {
  auto where = [frame_index](std::size_t i) {
    std::string s = "point " + std::to_string(i);
    if (frame_index >= 0) s += " of frame " + std::to_string(frame_index);
    return s;
  };
  const std::size_t n = cloud.points.size();
  if (cloud.signal.size() != n || cloud.range.size() != n || cloud.ring.size() != n ||
      cloud.col.size() != n) {
    fail(Err::InvariantViolation, "per-point field lengths differ" +
                                      (frame_index >= 0 ? " in frame " + std::to_string(frame_index)
                                                        : std::string()));
  }
  std::unordered_set<std::uint32_t> seen;
  seen.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (cloud.range[i] < 0.0f)
      fail(Err::InvariantViolation, "negative range at " + where(i));
    if (cloud.ring[i] >= static_cast<std::uint16_t>(geom.height))
      fail(Err::InvariantViolation, "ring out of bounds at " + where(i));
    if (cloud.col[i] >= static_cast<std::uint16_t>(geom.width))
      fail(Err::InvariantViolation, "col out of bounds at " + where(i));
    if (cloud.range[i] > 0.0f) {
      std::uint32_t key = (static_cast<std::uint32_t>(cloud.ring[i]) << 16) | cloud.col[i];
      if (!seen.insert(key).second)
        fail(Err::InvariantViolation,
             "duplicate (ring,col) = (" + std::to_string(cloud.ring[i]) + "," +
                 std::to_string(cloud.col[i]) + ") at " + where(i));
    }
  }
}

}  // namespace lkp
