#pragma once

// Hyperparameter selection: the clusterpath lambda sweep for convex
// clustering and elbow / silhouette estimation of K.

#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "odcl/clustering/conditions.hpp"
#include "odcl/clustering/convex.hpp"
#include "odcl/clustering/kmeans.hpp"
#include "odcl/csv.hpp"

namespace odcl {

struct LambdaGrid {
  int points = 10;
  double start = 0.1;     // initial value for both endpoint searches
  double factor = 1.25;   // geometric step of the endpoint search
  int max_expansions = 400;
  ConvexOptions solver;
};

struct PathPoint {
  double lambda = 0.0;
  int k = 0;
  double objective = 0.0;
  bool verified = false;
  bool failed = false;
};

struct ClusterpathResult {
  double lambda = 0.0;
  ClusteringResult clustering;
  std::vector<PathPoint> path;
  std::vector<std::string> warnings;
};

inline void write_path_csv(std::ostream& os, const std::vector<PathPoint>& path) {
  os << "lambda,k,objective,verified\n";
  for (const auto& p : path) {
    if (p.failed) {
      continue;
    }
    os << csv::format(p.lambda) << ',' << p.k << ',' << csv::format(p.objective) << ','
       << (p.verified ? 1 : 0) << '\n';
  }
}

// Sweeps N equidistant lambdas between a value giving all-singleton clusters
// (up to points that coincide at the fusion threshold) and one giving a
// single cluster, checks the a-posteriori recovery condition at each, and
// keeps the most persistent cluster count (verified points first, ties
// toward larger lambda). The two trivial partitions never count as verified.
inline ClusterpathResult clusterpath_select(const PointSet& pts, const LambdaGrid& grid = {}) {
  pts.validate();
  require(grid.points >= 2, "clusterpath_select: grid needs at least 2 points");
  require(grid.start > 0.0 && grid.factor > 1.0, "clusterpath_select: invalid grid search");
  const int m = static_cast<int>(pts.size());
  ClusterpathResult out;
  if (m == 1) {
    out.lambda = grid.start;
    out.clustering = convex_cluster(pts, grid.start, grid.solver);
    return out;
  }

  double hi = grid.start;
  for (int e = 0; convex_cluster(pts, hi, grid.solver).num_clusters() > 1; ++e) {
    if (e >= grid.max_expansions) {
      throw SolverError("clusterpath_select: no single-cluster lambda found");
    }
    hi *= grid.factor;
  }
  // points already within the fusion threshold can never be separated
  const int distinct =
      count_clusters(fuse(pts.points, grid.solver.fusion_rel * diameter(pts.points)));
  double lo = grid.start;
  for (int e = 0; convex_cluster(pts, lo, grid.solver).num_clusters() < distinct; ++e) {
    if (e >= grid.max_expansions) {
      throw SolverError("clusterpath_select: no all-singleton lambda found");
    }
    lo /= grid.factor;
  }

  std::vector<ClusteringResult> results;
  for (int g = 0; g < grid.points; ++g) {
    const double lam = lo + (hi - lo) * g / static_cast<double>(grid.points - 1);
    PathPoint p;
    p.lambda = lam;
    try {
      auto res = convex_cluster(pts, lam, grid.solver);
      p.k = res.num_clusters();
      p.objective = res.diagnostics.objective;
      p.verified = p.k > 1 && p.k < distinct && verify_recovery(pts, res.assignment, lam).holds;
      results.push_back(std::move(res));
    } catch (const SolverError& e) {
      p.failed = true;
      out.warnings.push_back(e.what());
      results.emplace_back();
    }
    out.path.push_back(p);
  }

  std::map<int, int> freq;
  bool any_verified = false;
  for (const auto& p : out.path) {
    if (!p.failed) {
      ++freq[p.k];
      any_verified = any_verified || p.verified;
    }
  }
  if (freq.empty()) {
    throw SolverError("clusterpath_select: convex clustering failed at every grid point");
  }
  int best = -1;
  for (int g = grid.points - 1; g >= 0; --g) {
    const auto& p = out.path[static_cast<std::size_t>(g)];
    if (p.failed || (any_verified && !p.verified)) {
      continue;
    }
    if (best < 0 || freq[p.k] > freq[out.path[static_cast<std::size_t>(best)].k]) {
      best = g;
    }
  }
  out.lambda = out.path[static_cast<std::size_t>(best)].lambda;
  out.clustering = std::move(results[static_cast<std::size_t>(best)]);
  out.clustering.diagnostics.algorithm = "clusterpath";
  out.clustering.diagnostics.condition_margins["verified"] =
      out.path[static_cast<std::size_t>(best)].verified ? 1.0 : 0.0;
  return out;
}

// Mean silhouette (Euclidean); points in singleton clusters score 0.
inline double silhouette(const Mat& points, const Assignment& a) {
  const int K = count_clusters(a);
  const Index m = points.rows();
  if (K < 2) {
    return -1.0;
  }
  std::vector<int> sizes(static_cast<std::size_t>(K), 0);
  for (int c : a) {
    ++sizes[static_cast<std::size_t>(c)];
  }
  double total = 0.0;
  Vec sums(K);
  for (Index i = 0; i < m; ++i) {
    const int own = a[static_cast<std::size_t>(i)];
    if (sizes[static_cast<std::size_t>(own)] == 1) {
      continue;
    }
    sums.setZero();
    for (Index j = 0; j < m; ++j) {
      if (j != i) {
        sums[a[static_cast<std::size_t>(j)]] += (points.row(i) - points.row(j)).norm();
      }
    }
    const double ai = sums[own] / (sizes[static_cast<std::size_t>(own)] - 1);
    double bi = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      if (k != own && sizes[static_cast<std::size_t>(k)] > 0) {
        bi = std::min(bi, sums[k] / sizes[static_cast<std::size_t>(k)]);
      }
    }
    const double den = std::max(ai, bi);
    total += den > 0.0 ? (bi - ai) / den : 0.0;
  }
  return total / static_cast<double>(m);
}

enum class KMetric { kElbow, kSilhouette };

struct KEstimate {
  int k = 1;
  std::vector<double> scores;  // cost (elbow) or silhouette, indexed by K - 1
};

inline KEstimate estimate_k_scored(const PointSet& pts, int k_max, KMetric metric,
                                   std::uint64_t seed, double threshold = 0.1,
                                   int restarts = 10) {
  pts.validate();
  require(k_max >= 1 && k_max <= pts.size(), "estimate_k: need 1 <= k_max <= m");
  require(metric != KMetric::kSilhouette || k_max >= 2,
          "estimate_k: silhouette needs k_max >= 2");
  KEstimate est;
  if (metric == KMetric::kElbow) {
    for (int K = 1; K <= k_max; ++K) {
      est.scores.push_back(kmeans_pp(pts, K, seed, restarts).diagnostics.objective);
    }
    est.k = k_max;
    if (k_max == 1) {
      est.k = 1;
      return est;
    }
    const double first_drop = est.scores[0] - est.scores[1];
    if (first_drop <= 0.0) {
      est.k = 1;
      return est;
    }
    for (int K = 1; K < k_max; ++K) {
      const double drop = est.scores[static_cast<std::size_t>(K - 1)] -
                          est.scores[static_cast<std::size_t>(K)];
      if (drop < threshold * first_drop) {
        est.k = K;
        break;
      }
    }
    return est;
  }
  est.scores.push_back(std::numeric_limits<double>::quiet_NaN());
  double best = -std::numeric_limits<double>::infinity();
  for (int K = 2; K <= k_max; ++K) {
    const auto res = kmeans_pp(pts, K, seed, restarts);
    const double s = silhouette(pts.points, res.assignment);
    est.scores.push_back(s);
    if (s > best) {
      best = s;
      est.k = K;
    }
  }
  return est;
}

inline int estimate_k(const PointSet& pts, int k_max, KMetric metric, std::uint64_t seed,
                      double threshold = 0.1) {
  return estimate_k_scored(pts, k_max, metric, seed, threshold).k;
}

}  // namespace odcl
