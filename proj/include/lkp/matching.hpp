#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "lkp/features.hpp"

namespace lkp {

struct MatchPair {
  std::int32_t idx_a = -1;
  std::int32_t idx_b = -1;
  int distance = 0;  // Hamming, bits
};

// Brute-force matcher with cross check: a pair survives only if each side is
// the other's nearest neighbour. Ties resolve to the lowest index, so the
// result is unique; every index appears at most once by construction.
inline std::vector<MatchPair> match_crosscheck(const std::vector<Descriptor>& desc_a,
                                               const std::vector<Descriptor>& desc_b) {
  const std::size_t na = desc_a.size(), nb = desc_b.size();
  if (na == 0 || nb == 0) return {};

  std::vector<std::int32_t> best_b(na, -1);
  std::vector<int> best_b_dist(na, std::numeric_limits<int>::max());
  std::vector<std::int32_t> best_a(nb, -1);
  std::vector<int> best_a_dist(nb, std::numeric_limits<int>::max());

  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const int d = hamming_distance(desc_a[i], desc_b[j]);
      if (d < best_b_dist[i]) {
        best_b_dist[i] = d;
        best_b[i] = static_cast<std::int32_t>(j);
      }
      if (d < best_a_dist[j]) {
        best_a_dist[j] = d;
        best_a[j] = static_cast<std::int32_t>(i);
      }
    }
  }

  std::vector<MatchPair> out;
  for (std::size_t i = 0; i < na; ++i) {
    const std::int32_t j = best_b[i];
    if (j >= 0 && best_a[static_cast<std::size_t>(j)] == static_cast<std::int32_t>(i))
      out.push_back({static_cast<std::int32_t>(i), j, best_b_dist[i]});
  }
  return out;
}

// matches / keypoints of the current frame; 0 when there are no keypoints.
inline double match_ratio(std::size_t n_matches, std::size_t n_keypoints) {
  if (n_keypoints == 0) return 0.0;
  return static_cast<double>(n_matches) / static_cast<double>(n_keypoints);
}

// Lowe ratio test with k = 2: the fraction of descriptors in A whose best
// match in B is strictly closer than `ratio` times the second best.
inline double distinctiveness(const std::vector<Descriptor>& desc_a,
                              const std::vector<Descriptor>& desc_b, double ratio = 0.8) {
  if (desc_a.empty() || desc_b.size() < 2) return 0.0;
  std::size_t passed = 0;
  for (const Descriptor& a : desc_a) {
    int d1 = std::numeric_limits<int>::max();
    int d2 = std::numeric_limits<int>::max();
    for (const Descriptor& b : desc_b) {
      const int d = hamming_distance(a, b);
      if (d < d1) {
        d2 = d1;
        d1 = d;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (static_cast<double>(d1) < ratio * static_cast<double>(d2)) ++passed;
  }
  return static_cast<double>(passed) / static_cast<double>(desc_a.size());
}

}  // namespace lkp
