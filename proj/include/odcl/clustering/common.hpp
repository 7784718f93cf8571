#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odcl/types.hpp"

namespace odcl {

// Points to be clustered, one per row (for the protocol: one local model per user).
struct PointSet {
  Mat points;
  std::vector<int> ids;

  PointSet() = default;
  explicit PointSet(Mat p) : points(std::move(p)) {
    ids.resize(static_cast<std::size_t>(points.rows()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      ids[i] = static_cast<int>(i);
    }
  }

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }

  void validate() const {
    require(points.rows() >= 1, "PointSet: need at least one point");
    require(static_cast<Index>(ids.size()) == points.rows(), "PointSet: ids size mismatch");
    require(points.allFinite(), "PointSet: non-finite coordinates");
  }
};

struct ClusteringDiagnostics {
  std::string algorithm;
  int iterations = 0;
  double objective = 0.0;
  std::optional<double> lambda;
  std::map<std::string, double> condition_margins;
};

struct ClusteringResult {
  Assignment assignment;
  Mat centroids;  // K' x d
  ClusteringDiagnostics diagnostics;

  int num_clusters() const { return static_cast<int>(centroids.rows()); }
};

// Means of the rows of `points` per cluster, summed in increasing row order.
inline Mat cluster_means(const Mat& points, const Assignment& a, int K) {
  Mat means = Mat::Zero(K, points.cols());
  std::vector<int> counts(static_cast<std::size_t>(K), 0);
  for (Index i = 0; i < points.rows(); ++i) {
    const int k = a[static_cast<std::size_t>(i)];
    means.row(k) += points.row(i);
    ++counts[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < K; ++k) {
    if (counts[static_cast<std::size_t>(k)] > 0) {
      means.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
    }
  }
  return means;
}

// Sum of squared distances to the assigned centers.
inline double kmeans_cost(const Mat& points, const Assignment& a, const Mat& centers) {
  double s = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    s += (points.row(i) - centers.row(a[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return s;
}

inline double diameter(const Mat& points) {
  double d2 = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index j = i + 1; j < points.rows(); ++j) {
      d2 = std::max(d2, (points.row(i) - points.row(j)).squaredNorm());
    }
  }
  return std::sqrt(d2);
}

// Builds a result from a (possibly non-canonical) assignment, with centroids
// equal to the means of the original points.
inline ClusteringResult make_result(const Mat& points, const Assignment& a,
                                    std::string algorithm) {
  ClusteringResult r;
  r.assignment = canonical(a);
  const int K = count_clusters(r.assignment);
  r.centroids = cluster_means(points, r.assignment, K);
  r.diagnostics.algorithm = std::move(algorithm);
  r.diagnostics.objective = kmeans_cost(points, r.assignment, r.centroids);
  return r;
}

inline void validate_truth(const PointSet& pts, const Assignment& truth) {
  require(static_cast<Index>(truth.size()) == pts.size(),
          "truth assignment must cover every point");
  const auto groups = members(truth);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    require(!groups[k].empty(), "truth has an empty cluster " + std::to_string(k));
  }
}

inline nlohmann::json to_json(const ClusteringResult& r) {
  nlohmann::json j;
  j["assignment"] = r.assignment;
  auto cents = nlohmann::json::array();
  for (Index k = 0; k < r.centroids.rows(); ++k) {
    std::vector<double> row(static_cast<std::size_t>(r.centroids.cols()));
    for (Index c = 0; c < r.centroids.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = r.centroids(k, c);
    }
    cents.push_back(row);
  }
  j["centroids"] = cents;
  j["k_prime"] = r.num_clusters();
  auto& d = j["diagnostics"];
  d["algorithm"] = r.diagnostics.algorithm;
  d["iterations"] = r.diagnostics.iterations;
  d["objective"] = r.diagnostics.objective;
  d["lambda"] = r.diagnostics.lambda ? nlohmann::json(*r.diagnostics.lambda) : nlohmann::json();
  d["condition_margins"] = r.diagnostics.condition_margins;
  return j;
}

}  // namespace odcl
