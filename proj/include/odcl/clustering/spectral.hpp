#pragma once

// Spectral K-means: SVD projection and seeding (part I), core-point center
// refinement (part II), Lloyd on the original points (part III).

#include <cstdint>

#include "odcl/clustering/kmeans.hpp"

namespace odcl {

inline constexpr int kSpectralRestarts = 25;

// Rows of A projected onto the span of its top-K right singular vectors.
inline Mat project_top_k(const Mat& A, int K) {
  Eigen::BDCSVD<Mat> svd(A, Eigen::ComputeThinV);
  const Index r = std::min<Index>(K, svd.matrixV().cols());
  const Mat Vk = svd.matrixV().leftCols(r);
  return A * Vk * Vk.transpose();
}

namespace detail {

struct PartOne {
  Mat projected;
  ClusteringResult seeding;  // clustering of the projected points
};

inline PartOne spectral_part_one(const PointSet& pts, int K, std::uint64_t seed) {
  pts.validate();
  require(K >= 1, "spectral_kmeans: K must be >= 1");
  require(K <= pts.size(), "spectral_kmeans: K = " + std::to_string(K) + " exceeds m = " +
                               std::to_string(pts.size()));
  PartOne p;
  p.projected = project_top_k(pts.points, K);
  PointSet proj(p.projected);
  proj.ids = pts.ids;
  p.seeding = kmeans_pp(proj, K, seed, kSpectralRestarts);
  return p;
}

}  // namespace detail

inline ClusteringResult spectral_kmeans_part1(const PointSet& pts, int K, std::uint64_t seed) {
  auto p = detail::spectral_part_one(pts, K, seed);
  auto res = make_result(pts.points, p.seeding.assignment, "spectral_part1");
  res.diagnostics.iterations = p.seeding.diagnostics.iterations;
  res.diagnostics.condition_margins["projected_cost"] = p.seeding.diagnostics.objective;
  return res;
}

inline ClusteringResult spectral_kmeans(const PointSet& pts, int K, std::uint64_t seed,
                                        int max_iter = 300) {
  auto p = detail::spectral_part_one(pts, K, seed);
  const Mat& nu = p.seeding.centroids;  // centers in the projected space
  const Index Kp = nu.rows();
  Mat refined = nu;
  std::vector<int> core_sizes(static_cast<std::size_t>(Kp), 0);
  Mat sums = Mat::Zero(Kp, pts.dim());
  for (Index i = 0; i < pts.size(); ++i) {
    const auto ahat = p.projected.row(i);
    for (Index k = 0; k < Kp; ++k) {
      const double dk = (ahat - nu.row(k)).norm();
      bool core = true;
      for (Index l = 0; l < Kp && core; ++l) {
        core = l == k || dk <= (ahat - nu.row(l)).norm() / 3.0;
      }
      if (core) {
        sums.row(k) += pts.points.row(i);
        ++core_sizes[static_cast<std::size_t>(k)];
      }
    }
  }
  for (Index k = 0; k < Kp; ++k) {
    if (core_sizes[static_cast<std::size_t>(k)] > 0) {
      refined.row(k) = sums.row(k) / static_cast<double>(core_sizes[static_cast<std::size_t>(k)]);
    }
  }
  auto res = lloyd(pts, refined, max_iter);
  res.diagnostics.algorithm = "spectral_kmeans";
  return res;
}

}  // namespace odcl
