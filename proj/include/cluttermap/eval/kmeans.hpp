#pragma once

#include <algorithm>
#include <limits>
#include <set>
#include <vector>

#include "cluttermap/core/rng.hpp"
#include "cluttermap/geo/geo.hpp"

namespace cluttermap::eval {

// Geographic clustering over planar-meter coordinates.
struct ClusterAssignment {
  int k = 0;
  std::vector<int> assignment;             // per record, in input order
  std::vector<geo::PlanarPoint> centroids;
  std::vector<double> wcss_history;        // per Lloyd iteration

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> m(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < assignment.size(); ++i)
      m[static_cast<std::size_t>(assignment[i])].push_back(i);
    return m;
  }
};

namespace detail {

inline double sq_dist(geo::PlanarPoint a, geo::PlanarPoint b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline int nearest_centroid(const std::vector<geo::PlanarPoint>& centroids,
                            geo::PlanarPoint p) {
  int best = 0;
  double best_d = sq_dist(centroids[0], p);
  for (int c = 1; c < static_cast<int>(centroids.size()); ++c) {
    const double d = sq_dist(centroids[static_cast<std::size_t>(c)], p);
    if (d < best_d) {  // ties stay with the lowest index
      best_d = d;
      best = c;
    }
  }
  return best;
}

inline std::vector<geo::PlanarPoint> kmeanspp_seeds(
    const std::vector<geo::PlanarPoint>& points, int k, Rng& rng) {
  std::vector<geo::PlanarPoint> centroids;
  centroids.push_back(points[rng.uniform_int(points.size())]);
  std::vector<double> d2(points.size());
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = sq_dist(points[i], centroids[0]);
      for (std::size_t c = 1; c < centroids.size(); ++c)
        d2[i] = std::min(d2[i], sq_dist(points[i], centroids[c]));
      total += d2[i];
    }
    if (total <= 0) {
      // All remaining points coincide with a centroid; spread over distinct
      // points is guaranteed by the precondition, so pick any non-centroid.
      centroids.push_back(points[rng.uniform_int(points.size())]);
      continue;
    }
    double target = rng.uniform() * total;
    std::size_t chosen = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      target -= d2[i];
      if (target <= 0) {
        chosen = i;
        break;
      }
    }
    centroids.push_back(points[chosen]);
  }
  return centroids;
}

}  // namespace detail

// Lloyd's algorithm from k-means++ seeding. Converges when assignments are
// stable or max_iters is reached; an emptied cluster is repaired by seizing
// the point farthest from its current centroid.
inline ClusterAssignment kmeans_geo(const std::vector<geo::PlanarPoint>& points,
                                    int k, std::uint64_t seed,
                                    int max_iters = 100) {
  require(k >= 1, "cluster count must be positive");
  std::set<std::pair<double, double>> distinct;
  for (const auto& p : points) distinct.insert({p.x, p.y});
  require(static_cast<std::size_t>(k) <= distinct.size(), "k=", k,
          " exceeds the ", distinct.size(), " distinct locations");

  Rng rng(derive_seed(seed, "kmeans"));
  ClusterAssignment result;
  result.k = k;
  result.centroids = detail::kmeanspp_seeds(points, k, rng);
  result.assignment.assign(points.size(), -1);

  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const int c = detail::nearest_centroid(result.centroids, points[i]);
      if (c != result.assignment[i]) {
        result.assignment[i] = c;
        changed = true;
      }
    }
    // Repair empty clusters before the mean update.
    std::vector<long long> counts(static_cast<std::size_t>(k), 0);
    for (int c : result.assignment) ++counts[static_cast<std::size_t>(c)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t farthest = 0;
      double worst = -1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (counts[static_cast<std::size_t>(result.assignment[i])] <= 1) continue;
        const double d = detail::sq_dist(
            points[i],
            result.centroids[static_cast<std::size_t>(result.assignment[i])]);
        if (d > worst) {
          worst = d;
          farthest = i;
        }
      }
      --counts[static_cast<std::size_t>(result.assignment[farthest])];
      result.assignment[farthest] = c;
      ++counts[static_cast<std::size_t>(c)];
      result.centroids[static_cast<std::size_t>(c)] = points[farthest];
      changed = true;
    }
    // Mean update.
    std::vector<double> sx(static_cast<std::size_t>(k), 0.0), sy(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sx[static_cast<std::size_t>(result.assignment[i])] += points[i].x;
      sy[static_cast<std::size_t>(result.assignment[i])] += points[i].y;
    }
    for (int c = 0; c < k; ++c) {
      result.centroids[static_cast<std::size_t>(c)] = {
          sx[static_cast<std::size_t>(c)] / static_cast<double>(counts[static_cast<std::size_t>(c)]),
          sy[static_cast<std::size_t>(c)] / static_cast<double>(counts[static_cast<std::size_t>(c)])};
    }
    double wcss = 0;
    for (std::size_t i = 0; i < points.size(); ++i)
      wcss += detail::sq_dist(
          points[i],
          result.centroids[static_cast<std::size_t>(result.assignment[i])]);
    result.wcss_history.push_back(wcss);
    if (!changed) break;
  }
  // Final pass restores the nearest-centroid invariant even when max_iters
  // cut the loop mid-update.
  for (std::size_t i = 0; i < points.size(); ++i)
    result.assignment[i] = detail::nearest_centroid(result.centroids, points[i]);
  return result;
}

}  // namespace cluttermap::eval
