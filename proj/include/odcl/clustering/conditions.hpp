#pragma once

// Recovery conditions: separability, the convex-clustering lambda interval,
// a-posteriori verification of a produced partition, and center separation.

#include <cmath>
#include <limits>
#include <utility>

#include "odcl/clustering/common.hpp"

namespace odcl {

struct SeparabilityReport {
  double max_radius = 0.0;
  double min_center_gap = std::numeric_limits<double>::infinity();
  double alpha_required = 0.0;
  bool holds = true;
};

namespace detail {

struct TruthGeometry {
  Mat centers;
  std::vector<int> sizes;
  double max_radius = 0.0;
  double min_gap = std::numeric_limits<double>::infinity();
};

inline TruthGeometry truth_geometry(const PointSet& pts, const Assignment& truth) {
  validate_truth(pts, truth);
  TruthGeometry g;
  const int K = count_clusters(truth);
  g.centers = cluster_means(pts.points, truth, K);
  g.sizes.assign(static_cast<std::size_t>(K), 0);
  for (Index i = 0; i < pts.size(); ++i) {
    const int k = truth[static_cast<std::size_t>(i)];
    ++g.sizes[static_cast<std::size_t>(k)];
    g.max_radius = std::max(g.max_radius, (pts.points.row(i) - g.centers.row(k)).norm());
  }
  for (int k = 0; k < K; ++k) {
    for (int l = k + 1; l < K; ++l) {
      g.min_gap = std::min(g.min_gap, (g.centers.row(k) - g.centers.row(l)).norm());
    }
  }
  return g;
}

}  // namespace detail

// alpha * max_radius < min_center_gap with respect to `truth`.
inline SeparabilityReport check_separability(const PointSet& pts, const Assignment& truth,
                                             double alpha) {
  require(alpha > 1.0, "check_separability: alpha must exceed 1");
  const auto g = detail::truth_geometry(pts, truth);
  SeparabilityReport r;
  r.max_radius = g.max_radius;
  r.min_center_gap = g.min_gap;
  r.alpha_required = alpha;
  r.holds = std::isinf(g.min_gap) || alpha * g.max_radius < g.min_gap;
  return r;
}

inline int smallest_cluster(const Assignment& truth) {
  const auto groups = members(truth);
  std::size_t s = groups.front().size();
  for (const auto& g : groups) {
    s = std::min(s, g.size());
  }
  return static_cast<int>(s);
}

// Separation factor under which convex clustering provably recovers `truth`.
inline double alpha_convex(int m, int smallest) {
  return 4.0 * (m - smallest) / static_cast<double>(smallest);
}

// Separation factor for spectral K-means with constant c.
inline double alpha_spectral(int m, int smallest, double c) {
  return 2.0 + 2.0 * c * std::sqrt(static_cast<double>(m)) / std::sqrt(static_cast<double>(smallest));
}

// Sufficient lambda range [lo, hi) for recovering `truth`; lo may exceed hi.
inline std::pair<double, double> lambda_interval(const PointSet& pts, const Assignment& truth) {
  require(count_clusters(truth) >= 2, "lambda_interval: undefined for a single cluster");
  const auto g = detail::truth_geometry(pts, truth);
  const int m = static_cast<int>(pts.size());
  const int small = smallest_cluster(truth);
  return {g.max_radius / small, g.min_gap / (2.0 * (m - small))};
}

struct RecoveryCheck {
  double lower = 0.0;  // max within-cluster diameter / cluster size
  double upper = std::numeric_limits<double>::infinity();
  bool holds = false;
};

// A-posteriori condition on a partition `part` produced at penalty lambda:
// max_k max_{i,j in V_k} |a_i - a_j| / |V_k| <= lambda < min_{k!=l} |mu_k - mu_l| / (2m - |V_k| - |V_l|).
inline RecoveryCheck verify_recovery(const PointSet& pts, const Assignment& part, double lambda) {
  validate_truth(pts, part);
  const auto groups = members(part);
  const int K = static_cast<int>(groups.size());
  const int m = static_cast<int>(pts.size());
  RecoveryCheck rc;
  for (const auto& g : groups) {
    double diam = 0.0;
    for (std::size_t a = 0; a < g.size(); ++a) {
      for (std::size_t b = a + 1; b < g.size(); ++b) {
        diam = std::max(diam, (pts.points.row(g[a]) - pts.points.row(g[b])).norm());
      }
    }
    rc.lower = std::max(rc.lower, diam / static_cast<double>(g.size()));
  }
  const Mat centers = cluster_means(pts.points, part, K);
  for (int k = 0; k < K; ++k) {
    for (int l = k + 1; l < K; ++l) {
      const double denom = 2.0 * m - static_cast<double>(groups[static_cast<std::size_t>(k)].size()) -
                           static_cast<double>(groups[static_cast<std::size_t>(l)].size());
      rc.upper = std::min(rc.upper, (centers.row(k) - centers.row(l)).norm() / denom);
    }
  }
  rc.holds = rc.lower <= lambda && lambda < rc.upper;
  return rc;
}

struct CenterSeparation {
  bool holds = false;
  std::vector<double> delta;  // per cluster
  double spectral_norm = 0.0;
  double frobenius_norm = 0.0;
  double max_c = 0.0;  // largest c for which the condition holds
};

// |mu_k - mu_l| >= c (Delta_k + Delta_l) for all k != l, with
// Delta_k = min(sqrt(K) |A - C|_2, |A - C|_F) / sqrt(|C_k|).
inline CenterSeparation center_separation_holds(const PointSet& pts, const Assignment& truth,
                                                double c) {
  require(c > 0.0, "center_separation_holds: c must be positive");
  const auto g = detail::truth_geometry(pts, truth);
  const int K = static_cast<int>(g.sizes.size());
  Mat resid = pts.points;
  for (Index i = 0; i < pts.size(); ++i) {
    resid.row(i) -= g.centers.row(truth[static_cast<std::size_t>(i)]);
  }
  CenterSeparation cs;
  cs.frobenius_norm = resid.norm();
  if (resid.size() > 0) {
    Eigen::JacobiSVD<Mat> svd(resid);
    cs.spectral_norm = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  }
  const double base = std::min(std::sqrt(static_cast<double>(K)) * cs.spectral_norm,
                               cs.frobenius_norm);
  for (int k = 0; k < K; ++k) {
    cs.delta.push_back(base / std::sqrt(static_cast<double>(g.sizes[static_cast<std::size_t>(k)])));
  }
  cs.max_c = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    for (int l = k + 1; l < K; ++l) {
      const double gap = (g.centers.row(k) - g.centers.row(l)).norm();
      const double dsum = cs.delta[static_cast<std::size_t>(k)] + cs.delta[static_cast<std::size_t>(l)];
      if (dsum > 0.0) {
        cs.max_c = std::min(cs.max_c, gap / dsum);
      }
    }
  }
  cs.holds = c <= cs.max_c;
  return cs;
}

}  // namespace odcl
