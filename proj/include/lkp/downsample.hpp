#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "lkp/cloud_image.hpp"
#include "lkp/features.hpp"
#include "lkp/point_cloud.hpp"

namespace lkp {

// Per-modality expansion size. The neighbourhood semantics (k nearest 3D
// points vs an s x s pixel window) is selected by ExpandMode; values within
// [3,7] match the published sweep, anything else is accepted but flagged.
struct NeighborSpec {
  int k_signal = 5;
  int k_range = 5;

  bool within_paper_range() const {
    return k_signal >= 3 && k_signal <= 7 && k_range >= 3 && k_range <= 7;
  }
};

enum class ExpandMode { Grid, Knn };

inline const char* to_string(ExpandMode m) { return m == ExpandMode::Grid ? "grid" : "knn"; }

inline ExpandMode expand_mode_from_string(const std::string& s) {
  if (s == "grid") return ExpandMode::Grid;
  if (s == "knn") return ExpandMode::Knn;
  fail(Err::ParseError, "unknown expand mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// Exact KD-tree with median splits. Distances compare as (d^2, index) so
// equidistant neighbours resolve to the lower point index; results are
// identical to a brute-force scan by construction.
class KdTree {
 public:
  explicit KdTree(const std::vector<Eigen::Vector3f>& points) : pts_(points) {
    order_.resize(pts_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(pts_.size() * 2 + 1);
    root_ = build(0, static_cast<int>(order_.size()));
  }

  // k nearest neighbours of `query`, excluding point index `exclude`.
  // Returned sorted by (distance, index).
  std::vector<std::int32_t> knn(const Eigen::Vector3f& query, int k,
                                std::int32_t exclude = -1) const {
    Heap heap;
    heap.reserve(static_cast<std::size_t>(k) + 1);
    search(root_, query, k, exclude, heap);
    std::sort(heap.begin(), heap.end());
    std::vector<std::int32_t> out;
    out.reserve(heap.size());
    for (const auto& [d2, idx] : heap) out.push_back(idx);
    return out;
  }

 private:
  using Entry = std::pair<double, std::int32_t>;  // (squared distance, index)
  using Heap = std::vector<Entry>;

  struct Node {
    std::int32_t point = -1;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int8_t axis = 0;
  };

  int build(int lo, int hi) {
    if (lo >= hi) return -1;
    // Split on the axis of largest extent.
    Eigen::Vector3f mn = pts_[order_[static_cast<std::size_t>(lo)]];
    Eigen::Vector3f mx = mn;
    for (int i = lo + 1; i < hi; ++i) {
      mn = mn.cwiseMin(pts_[order_[static_cast<std::size_t>(i)]]);
      mx = mx.cwiseMax(pts_[order_[static_cast<std::size_t>(i)]]);
    }
    int axis = 0;
    (mx - mn).maxCoeff(&axis);

    const int mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::int32_t a, std::int32_t b) {
                       const float va = pts_[static_cast<std::size_t>(a)][axis];
                       const float vb = pts_[static_cast<std::size_t>(b)][axis];
                       if (va != vb) return va < vb;
                       return a < b;
                     });
    Node node;
    node.point = order_[static_cast<std::size_t>(mid)];
    node.axis = static_cast<std::int8_t>(axis);
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    nodes_[static_cast<std::size_t>(id)].left = build(lo, mid);
    nodes_[static_cast<std::size_t>(id)].right = build(mid + 1, hi);
    return id;
  }

  static bool better(const Entry& a, const Entry& b) {
    return a.first < b.first || (a.first == b.first && a.second < b.second);
  }

  void consider(std::int32_t idx, const Eigen::Vector3f& query, int k, Heap& heap) const {
    const Eigen::Vector3f d = pts_[static_cast<std::size_t>(idx)] - query;
    const Entry e{static_cast<double>(d.x()) * d.x() + static_cast<double>(d.y()) * d.y() +
                      static_cast<double>(d.z()) * d.z(),
                  idx};
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back(e);
      std::push_heap(heap.begin(), heap.end(), better);
    } else if (better(e, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), better);
      heap.back() = e;
      std::push_heap(heap.begin(), heap.end(), better);
    }
  }

  void search(int node_id, const Eigen::Vector3f& query, int k, std::int32_t exclude,
              Heap& heap) const {
    if (node_id < 0) return;
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.point != exclude) consider(node.point, query, k, heap);

    const double delta = static_cast<double>(query[node.axis]) -
                         pts_[static_cast<std::size_t>(node.point)][node.axis];
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    search(near, query, k, exclude, heap);
    // The far side may still hold an equidistant lower-index point, so
    // prune strictly-greater only.
    if (static_cast<int>(heap.size()) < k || delta * delta <= heap.front().first)
      search(far, query, k, exclude, heap);
  }

  const std::vector<Eigen::Vector3f>& pts_;
  std::vector<std::int32_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// ---------------------------------------------------------------------------
// keypoints_to_points: keypoint coordinates at detection resolution are
// scaled to the native grid, rounded to the nearest pixel and looked up in
// the projection's pixel-to-point map. Keypoints landing on a no-return
// pixel search outward ring by ring (Chebyshev radius up to 2, row-major
// within a ring) for the nearest valid pixel; still-unmatched keypoints are
// dropped and counted.
struct KeypointMapping {
  std::vector<std::int32_t> point_indices;  // one per surviving keypoint
  int n_dropped = 0;
};

inline KeypointMapping keypoints_to_points(const std::vector<Keypoint>& kps, Extent det_dims,
                                           const LidarImage& native) {
  if (!native.has_point_map())
    fail(Err::InvariantViolation, "native image carries no pixel-to-point map");
  const int w = native.width(), h = native.height();
  KeypointMapping out;
  out.point_indices.reserve(kps.size());
  for (const Keypoint& kp : kps) {
    const auto [nx, ny] = scale_coords_to_native(kp.x, kp.y, det_dims, Extent{w, h});
    const int cx = static_cast<int>(std::lround(nx));
    const int cy = static_cast<int>(std::lround(ny));
    std::int32_t found = -1;
    for (int r = 0; r <= 2 && found < 0; ++r) {
      for (int dy = -r; dy <= r && found < 0; ++dy) {
        for (int dx = -r; dx <= r && found < 0; ++dx) {
          if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
          const int x = cx + dx, y = cy + dy;
          if (x < 0 || y < 0 || x >= w || y >= h) continue;
          const std::int32_t p = native.point_at(y, x);
          if (p >= 0) found = p;
        }
      }
    }
    if (found >= 0)
      out.point_indices.push_back(found);
    else
      ++out.n_dropped;
  }
  return out;
}

// ---------------------------------------------------------------------------
// knn_expand: union over seeds of {seed} and its k nearest 3D neighbours
// (exact, ties to the lower index). Result sorted by point index.
inline std::vector<std::int32_t> knn_expand(const PointCloud& cloud,
                                            const std::vector<std::int32_t>& seeds, int k) {
  if (seeds.empty()) return {};
  if (cloud.empty()) fail(Err::EmptyCloud, "knn_expand on empty cloud");
  if (k < 1) fail(Err::InvariantViolation, "k must be >= 1");

  KdTree tree(cloud.points);
  std::set<std::int32_t> result;
  for (std::int32_t seed : seeds) {
    result.insert(seed);
    for (std::int32_t n : tree.knn(cloud.points[static_cast<std::size_t>(seed)], k, seed))
      result.insert(n);
  }
  return {result.begin(), result.end()};
}

// Pixel-window expansion: for each seed keypoint's native pixel, collect the
// point indices of the valid pixels in the s x s window centred on it (for
// even s the window extends one further right/down).
inline std::vector<std::int32_t> grid_expand(const LidarImage& native,
                                             const std::vector<std::int32_t>& seeds, int s) {
  if (!native.has_point_map())
    fail(Err::InvariantViolation, "native image carries no pixel-to-point map");
  if (s < 1) fail(Err::InvariantViolation, "window size must be >= 1");
  const int w = native.width(), h = native.height();

  // Locate each seed's pixel. Build the reverse map once.
  std::vector<std::int32_t> point_to_pixel(static_cast<std::size_t>(w) * h, -1);
  std::vector<std::int32_t> pixel_of_point;
  {
    // point index -> pixel linear index
    std::int32_t max_point = -1;
    for (std::size_t i = 0; i < native.pixel_to_point.size(); ++i)
      max_point = std::max(max_point, native.pixel_to_point[i]);
    pixel_of_point.assign(static_cast<std::size_t>(max_point) + 1, -1);
    for (std::size_t i = 0; i < native.pixel_to_point.size(); ++i)
      if (native.pixel_to_point[i] >= 0)
        pixel_of_point[static_cast<std::size_t>(native.pixel_to_point[i])] =
            static_cast<std::int32_t>(i);
  }

  const int lo = (s - 1) / 2, hi = s / 2;
  std::set<std::int32_t> result;
  for (std::int32_t seed : seeds) {
    const std::int32_t px = pixel_of_point[static_cast<std::size_t>(seed)];
    if (px < 0) continue;
    const int cy = px / w, cx = px % w;
    for (int dy = -lo; dy <= hi; ++dy) {
      for (int dx = -lo; dx <= hi; ++dx) {
        const int x = cx + dx, y = cy + dy;
        if (x < 0 || y < 0 || x >= w || y >= h) continue;
        const std::int32_t p = native.point_at(y, x);
        if (p >= 0) result.insert(p);
      }
    }
  }
  return {result.begin(), result.end()};
}

// ---------------------------------------------------------------------------
// downsample_frame: detect on the preprocessed signal and range images,
// map both keypoint sets into the cloud and expand each with its modality's
// neighbour size; the union, sorted by point index, is the downsampled
// cloud.
struct DownsampleResult {
  PointCloud cloud;
  int n_keypoints_signal = 0;
  int n_keypoints_range = 0;
  int n_dropped = 0;
};

inline DownsampleResult downsample_frame(const PointCloud& cloud, const ImageU8& sig_img,
                                         const ImageU8& rng_img, DetectorKind det,
                                         const NeighborSpec& spec,
                                         ExpandMode mode = ExpandMode::Grid,
                                         const DetectorParams& dp = {},
                                         const SensorGeometry& geom = {}) {
  // The two natives share one pixel-to-point map; range projection is the
  // canonical source of it.
  const LidarImage native = project(cloud, Modality::Range, geom);

  const auto sig_kps = detect(sig_img, det, dp);
  const auto rng_kps = detect(rng_img, det, dp);

  DownsampleResult res;
  res.n_keypoints_signal = static_cast<int>(sig_kps.size());
  res.n_keypoints_range = static_cast<int>(rng_kps.size());
  if (sig_kps.empty() && rng_kps.empty())
    fail(Err::EmptyResult, "no keypoints on either modality");

  const auto sig_map = keypoints_to_points(sig_kps, Extent{sig_img.width, sig_img.height}, native);
  const auto rng_map = keypoints_to_points(rng_kps, Extent{rng_img.width, rng_img.height}, native);
  res.n_dropped = sig_map.n_dropped + rng_map.n_dropped;

  std::vector<std::int32_t> sig_pts, rng_pts;
  if (mode == ExpandMode::Knn) {
    sig_pts = sig_map.point_indices.empty()
                  ? std::vector<std::int32_t>{}
                  : knn_expand(cloud, sig_map.point_indices, spec.k_signal);
    rng_pts = rng_map.point_indices.empty()
                  ? std::vector<std::int32_t>{}
                  : knn_expand(cloud, rng_map.point_indices, spec.k_range);
  } else {
    sig_pts = grid_expand(native, sig_map.point_indices, spec.k_signal);
    rng_pts = grid_expand(native, rng_map.point_indices, spec.k_range);
  }

  std::vector<std::int32_t> merged;
  merged.reserve(sig_pts.size() + rng_pts.size());
  std::set_union(sig_pts.begin(), sig_pts.end(), rng_pts.begin(), rng_pts.end(),
                 std::back_inserter(merged));
  if (merged.empty()) fail(Err::EmptyResult, "no cloud points were selected");
  res.cloud = cloud.subset(merged);
  return res;
}

}  // namespace lkp
