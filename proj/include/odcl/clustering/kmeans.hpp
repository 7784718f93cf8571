#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "odcl/clustering/common.hpp"
#include "odcl/rng.hpp"

namespace odcl {

struct LloydResult {
  ClusteringResult result;
  std::vector<double> objective_trace;  // cost after every center update
};

inline int nearest_center(const Mat& centers, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < centers.rows(); ++k) {
    const double dist = (centers.row(k) - x).squaredNorm();
    if (dist < bd) {
      bd = dist;
      best = static_cast<int>(k);
    }
  }
  return best;
}

// Lloyd iterations from the given centers (rows). Ties go to the lowest
// center index; an empty cluster takes over the point farthest from its own
// center. Empty clusters left at the end are dropped.
inline LloydResult lloyd_traced(const PointSet& pts, const Mat& init_centers, int max_iter = 300) {
  pts.validate();
  require(init_centers.rows() >= 1, "lloyd: need at least one center");
  require(init_centers.cols() == pts.dim(), "lloyd: center dimension mismatch");
  require(max_iter >= 1, "lloyd: max_iter must be >= 1");
  const Mat& A = pts.points;
  const Index m = A.rows();
  const int K = static_cast<int>(init_centers.rows());
  Mat centers = init_centers;
  Assignment a(static_cast<std::size_t>(m), -1), prev;
  LloydResult out;
  int it = 0;
  for (it = 1; it <= max_iter; ++it) {
    prev = a;
    for (Index i = 0; i < m; ++i) {
      a[static_cast<std::size_t>(i)] = nearest_center(centers, A.row(i));
    }
    std::vector<int> counts(static_cast<std::size_t>(K), 0);
    for (int c : a) {
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int k = 0; k < K; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) {
        continue;
      }
      Index far = -1;
      double fd = 0.0;
      for (Index i = 0; i < m; ++i) {
        const int own = a[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(own)] <= 1) {
          continue;
        }
        const double dist = (A.row(i) - centers.row(own)).squaredNorm();
        if (dist > fd) {
          fd = dist;
          far = i;
        }
      }
      if (far >= 0) {
        --counts[static_cast<std::size_t>(a[static_cast<std::size_t>(far)])];
        a[static_cast<std::size_t>(far)] = k;
        counts[static_cast<std::size_t>(k)] = 1;
      }
    }
    const Mat means = cluster_means(A, a, K);
    for (int k = 0; k < K; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) {
        centers.row(k) = means.row(k);
      }
    }
    out.objective_trace.push_back(kmeans_cost(A, a, centers));
    if (a == prev) {
      break;
    }
  }
  out.result = make_result(A, a, "lloyd");
  out.result.diagnostics.iterations = std::min(it, max_iter);
  return out;
}

inline ClusteringResult lloyd(const PointSet& pts, const Mat& init_centers, int max_iter = 300) {
  return lloyd_traced(pts, init_centers, max_iter).result;
}

// K-means++ seeding: first center uniform, then D^2 sampling; returns point
// indices. `restart` selects an independent substream.
inline std::vector<Index> kmeanspp_indices(const PointSet& pts, int K, std::uint64_t seed,
                                           std::uint64_t restart = 0) {
  pts.validate();
  const Index m = pts.size();
  require(K >= 1, "kmeanspp_init: K must be >= 1");
  require(K <= m, "kmeanspp_init: K = " + std::to_string(K) + " exceeds m = " + std::to_string(m));
  Rng rng(seed, {Domain::kKmeansRestart, restart});
  std::vector<Index> chosen;
  std::vector<bool> taken(static_cast<std::size_t>(m), false);
  chosen.push_back(static_cast<Index>(rng.index(static_cast<std::uint64_t>(m))));
  taken[static_cast<std::size_t>(chosen[0])] = true;
  Vec d2(m);
  for (Index i = 0; i < m; ++i) {
    d2[i] = (pts.points.row(i) - pts.points.row(chosen[0])).squaredNorm();
  }
  while (static_cast<int>(chosen.size()) < K) {
    const double total = d2.sum();
    Index pick = -1;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double cum = 0.0;
      for (Index i = 0; i < m; ++i) {
        cum += d2[i];
        if (d2[i] > 0.0 && u < cum) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {  // rounding at the upper end
        for (Index i = m - 1; i >= 0; --i) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      std::vector<Index> free;
      for (Index i = 0; i < m; ++i) {
        if (!taken[static_cast<std::size_t>(i)]) {
          free.push_back(i);
        }
      }
      pick = free[rng.index(free.size())];
    }
    chosen.push_back(pick);
    taken[static_cast<std::size_t>(pick)] = true;
    for (Index i = 0; i < m; ++i) {
      d2[i] = std::min(d2[i], (pts.points.row(i) - pts.points.row(pick)).squaredNorm());
    }
  }
  return chosen;
}

inline Mat kmeanspp_init(const PointSet& pts, int K, std::uint64_t seed,
                         std::uint64_t restart = 0) {
  const auto idx = kmeanspp_indices(pts, K, seed, restart);
  Mat centers(K, pts.dim());
  for (int k = 0; k < K; ++k) {
    centers.row(k) = pts.points.row(idx[static_cast<std::size_t>(k)]);
  }
  return centers;
}

// Best of `restarts` K-means++ + Lloyd runs (lowest cost, ties to the
// earliest restart).
inline ClusteringResult kmeans_pp(const PointSet& pts, int K, std::uint64_t seed,
                                  int restarts = 10, int max_iter = 300) {
  require(restarts >= 1, "kmeans_pp: restarts must be >= 1");
  ClusteringResult best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    auto res = lloyd(pts, kmeanspp_init(pts, K, seed, static_cast<std::uint64_t>(r)), max_iter);
    if (res.diagnostics.objective < best_cost) {
      best_cost = res.diagnostics.objective;
      best = std::move(res);
    }
  }
  best.diagnostics.algorithm = "kmeans_pp";
  return best;
}

}  // namespace odcl
