#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "lkp/manifest.hpp"
#include "lkp/point_cloud.hpp"
#include "lkp/se3.hpp"

namespace lkp {

enum class SceneKind { Room, Corridor, ForestOfCylinders };

inline const char* to_string(SceneKind k) {
  switch (k) {
    case SceneKind::Room: return "room";
    case SceneKind::Corridor: return "corridor";
    case SceneKind::ForestOfCylinders: return "forest";
  }
  return "?";
}

inline SceneKind scene_kind_from_string(const std::string& s) {
  if (s == "room") return SceneKind::Room;
  if (s == "corridor") return SceneKind::Corridor;
  if (s == "forest") return SceneKind::ForestOfCylinders;
  fail(Err::ParseError, "unknown scene kind '" + s + "'");
}

// Synthetic stand-in for the recorded sequences: a textured box interior
// (Room/Corridor) or a ground plane with cylinders and open sky (Forest,
// which exercises no-return pixels). Signal follows albedo / range^2 with
// per-surface albedo bands so detectors have corners to find.
struct SceneSpec {
  SceneKind kind = SceneKind::Room;
  Eigen::Vector3d dims{10.0, 10.0, 3.0};  // interior extents, meters
  double band_size = 1.0;                 // albedo band pitch, meters
  double albedo_lo = 0.3;
  double albedo_hi = 1.0;
  std::vector<Eigen::Vector3d> waypoints{{0.0, 0.0, 0.0}};
  bool closed_path = false;  // wrap around the waypoint polyline
  double speed = 1.0;        // m/s along the path
  double frame_rate = 10.0;  // Hz
  int n_frames = 1;
  double noise_sigma = 0.0;  // additive Gaussian on range, meters
  std::uint64_t seed = 0;
  SensorGeometry geometry;
};

namespace detail {

// Two-tone checkerboard albedo from two surface coordinates.
inline double banded_albedo(double u, double v, const SceneSpec& spec) {
  const auto iu = static_cast<long>(std::floor(u / spec.band_size));
  const auto iv = static_cast<long>(std::floor(v / spec.band_size));
  return ((iu + iv) & 1) ? spec.albedo_hi : spec.albedo_lo;
}

struct Hit {
  double t = 0.0;
  double albedo = 0.0;
};

// Ray vs axis-aligned box interior, from inside; surface coordinates of the
// hit drive the albedo bands.
inline std::optional<Hit> raycast_box(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                      const Eigen::Vector3d& half, const SceneSpec& spec) {
  double best = std::numeric_limits<double>::infinity();
  int axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) continue;
    const double face = dir[a] > 0 ? half[a] : -half[a];
    const double t = (face - origin[a]) / dir[a];
    if (t > 1e-9 && t < best) {
      best = t;
      axis = a;
    }
  }
  if (axis < 0) return std::nullopt;
  const Eigen::Vector3d p = origin + best * dir;
  // Surface coordinates: the two axes orthogonal to the hit face.
  const int u_axis = (axis + 1) % 3, v_axis = (axis + 2) % 3;
  Hit h;
  h.t = best;
  h.albedo = banded_albedo(p[u_axis] + half[u_axis], p[v_axis] + half[v_axis], spec);
  return h;
}

inline std::optional<Hit> raycast_forest(const Eigen::Vector3d& origin,
                                         const Eigen::Vector3d& dir, const SceneSpec& spec) {
  double best = std::numeric_limits<double>::infinity();
  double albedo = 0.0;

  // Ground plane at z = -dims.z/2.
  const double ground_z = -spec.dims.z() / 2.0;
  if (dir.z() < -1e-15) {
    const double t = (ground_z - origin.z()) / dir.z();
    if (t > 1e-9 && t < best) {
      const Eigen::Vector3d p = origin + t * dir;
      if (std::abs(p.x()) <= spec.dims.x() / 2 && std::abs(p.y()) <= spec.dims.y() / 2) {
        best = t;
        albedo = banded_albedo(p.x() + spec.dims.x() / 2, p.y() + spec.dims.y() / 2, spec);
      }
    }
  }

  // Deterministic grid of cylinders, jittered by a hash of the cell.
  const double pitch = std::max(spec.band_size * 3.0, 1.5);
  const double radius = 0.25 * pitch;
  const int nx = static_cast<int>(spec.dims.x() / pitch / 2);
  const int ny = static_cast<int>(spec.dims.y() / pitch / 2);
  for (int ix = -nx; ix <= nx; ++ix) {
    for (int iy = -ny; iy <= ny; ++iy) {
      if (ix == 0 && iy == 0) continue;  // keep the origin clear
      const std::uint64_t cell_hash =
          splitmix64(spec.seed ^ (static_cast<std::uint64_t>(ix + 1000) << 20) ^
                     static_cast<std::uint64_t>(iy + 1000));
      const double jx = (static_cast<double>(cell_hash & 0xffff) / 65535.0 - 0.5) * pitch * 0.4;
      const double jy =
          (static_cast<double>((cell_hash >> 16) & 0xffff) / 65535.0 - 0.5) * pitch * 0.4;
      const Eigen::Vector2d c(ix * pitch + jx, iy * pitch + jy);

      // Ray vs infinite vertical cylinder, then clip by height.
      const Eigen::Vector2d o(origin.x() - c.x(), origin.y() - c.y());
      const Eigen::Vector2d d(dir.x(), dir.y());
      const double a = d.squaredNorm();
      if (a < 1e-15) continue;
      const double b = 2.0 * o.dot(d);
      const double cq = o.squaredNorm() - radius * radius;
      const double disc = b * b - 4 * a * cq;
      if (disc < 0) continue;
      const double t = (-b - std::sqrt(disc)) / (2 * a);
      if (t <= 1e-9 || t >= best) continue;
      const Eigen::Vector3d p = origin + t * dir;
      if (p.z() < ground_z || p.z() > ground_z + spec.dims.z()) continue;
      best = t;
      const double angle = std::atan2(p.y() - c.y(), p.x() - c.x());
      albedo = banded_albedo(angle * radius + 10.0, p.z() - ground_z, spec);
    }
  }

  if (!std::isfinite(best)) return std::nullopt;
  return Hit{best, albedo};
}

}  // namespace detail

// Poses along the waypoint polyline at the spec's frame rate and speed, yaw
// following the direction of travel.
inline Trajectory scene_trajectory(const SceneSpec& spec) {
  if (spec.waypoints.empty()) fail(Err::InvariantViolation, "need at least one waypoint");
  Trajectory traj;
  const double dt = 1.0 / spec.frame_rate;

  std::vector<double> seg_len;
  double total = 0.0;
  const std::size_t n_way = spec.waypoints.size();
  const std::size_t n_seg = spec.closed_path ? n_way : (n_way > 0 ? n_way - 1 : 0);
  for (std::size_t i = 0; i < n_seg; ++i) {
    const double l = (spec.waypoints[(i + 1) % n_way] - spec.waypoints[i]).norm();
    seg_len.push_back(l);
    total += l;
  }

  for (int k = 0; k < spec.n_frames; ++k) {
    Pose p;
    p.timestamp = k * dt;
    if (total <= 1e-12) {
      p.translation = spec.waypoints[0];
    } else {
      double s = spec.speed * k * dt;
      s = spec.closed_path ? std::fmod(s, total) : std::min(s, total - 1e-9);
      std::size_t seg = 0;
      while (seg < seg_len.size() - 1 && s > seg_len[seg]) {
        s -= seg_len[seg];
        ++seg;
      }
      const Eigen::Vector3d a = spec.waypoints[seg];
      const Eigen::Vector3d b = spec.waypoints[(seg + 1) % n_way];
      const double f = seg_len[seg] > 1e-12 ? s / seg_len[seg] : 0.0;
      p.translation = a + f * (b - a);
      const Eigen::Vector3d dir = (b - a).normalized();
      const double yaw = std::atan2(dir.y(), dir.x());
      p.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    }
    traj.poses.push_back(p);
  }
  return traj;
}

// Ray-cast one frame from `pose`. Beams follow the native grid: ring 0 at
// the top of the vertical FoV, azimuth 0 at +x sweeping counter-clockwise.
// Only beams that hit geometry produce points; misses leave no-return
// pixels. Deterministic per (seed, frame index).
inline PointCloud render_frame(const SceneSpec& spec, const Pose& pose, int frame_index) {
  const SensorGeometry& g = spec.geometry;
  const Eigen::Vector3d half = spec.dims / 2.0;
  const double vfov = spec.geometry.vfov_deg * 3.14159265358979323846 / 180.0;

  Pcg32 rng(splitmix64(spec.seed ^ (0x5ce4eULL + static_cast<std::uint64_t>(frame_index))));
  PointCloud cloud;
  cloud.timestamp = pose.timestamp;
  cloud.reserve(static_cast<std::size_t>(g.width) * g.height);

  for (int r = 0; r < g.height; ++r) {
    const double elev = vfov / 2.0 - vfov * r / (g.height - 1);
    const double ce = std::cos(elev), se = std::sin(elev);
    for (int c = 0; c < g.width; ++c) {
      const double az = 2.0 * 3.14159265358979323846 * c / g.width;
      const Eigen::Vector3d dir_sensor(ce * std::cos(az), ce * std::sin(az), se);
      const Eigen::Vector3d dir = pose.rotation * dir_sensor;

      std::optional<detail::Hit> hit;
      if (spec.kind == SceneKind::ForestOfCylinders)
        hit = detail::raycast_forest(pose.translation, dir, spec);
      else
        hit = detail::raycast_box(pose.translation, dir, half, spec);
      if (!hit || hit->t > g.max_range_m) continue;

      const double noisy =
          std::max(hit->t + (spec.noise_sigma > 0 ? rng.normal() * spec.noise_sigma : 0.0), 1e-3);
      const Eigen::Vector3d p_sensor = noisy * dir_sensor;
      const double sig = hit->albedo * 10000.0 / std::max(hit->t * hit->t, 0.25);
      cloud.push_back(p_sensor.cast<float>(), static_cast<float>(sig),
                      static_cast<float>(noisy), static_cast<std::uint16_t>(r),
                      static_cast<std::uint16_t>(c));
    }
  }
  return cloud;
}

// FrameSource that ray-casts on demand; frames never touch the disk, which
// keeps strided sweeps cheap.
class SceneFrameSource final : public FrameSource {
 public:
  explicit SceneFrameSource(SceneSpec spec)
      : spec_(std::move(spec)), trajectory_(scene_trajectory(spec_)) {
    check_bounds();
  }

  std::size_t size() const override { return trajectory_.size(); }

  PointCloud frame(std::size_t i) const override {
    return render_frame(spec_, trajectory_.poses.at(i), static_cast<int>(i));
  }

  const Trajectory& ground_truth() const { return trajectory_; }
  const SceneSpec& spec() const { return spec_; }

 private:
  void check_bounds() {
    if (spec_.kind == SceneKind::ForestOfCylinders) return;  // open scene
    const Eigen::Vector3d half = spec_.dims / 2.0;
    for (const Pose& p : trajectory_.poses) {
      for (int a = 0; a < 3; ++a) {
        if (std::abs(p.translation[a]) >= half[a])
          fail(Err::TrajectoryOutOfBounds,
               "trajectory leaves the scene at t=" + format_double(p.timestamp));
      }
    }
  }

  SceneSpec spec_;
  Trajectory trajectory_;
};

// generate_scene: render every frame to LKPC1 files plus frames.txt,
// manifest.json and the exact TUM ground truth.
inline void generate_scene(const SceneSpec& spec, const fs::path& out_dir) {
  SceneFrameSource source(spec);
  fs::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.geometry = spec.geometry;
  for (std::size_t i = 0; i < source.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05zu.lkpc", i);
    const PointCloud cloud = source.frame(i);
    write_cloud(out_dir / name, cloud);
    manifest.frames.push_back({i, cloud.timestamp, name});
  }
  write_tum(out_dir / "gt.tum", source.ground_truth());
  manifest.ground_truth = out_dir / "gt.tum";
  write_manifest(manifest);
}

}  // namespace lkp
