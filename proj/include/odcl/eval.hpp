#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "odcl/clustering/common.hpp"
#include "odcl/data.hpp"
#include "odcl/erm.hpp"
#include "odcl/protocol.hpp"

namespace odcl {

// (1/m) sum_i |u_i - u*_(i)|^2 / |u*_(i)|^2. When the models carry an
// intercept, the true intercept is part of both the error and the norm.
inline double normalized_mse(const std::vector<Vec>& per_user, const FederatedDataset& truth) {
  if (!truth.true_models) {
    throw InvalidArgument("normalized_mse: dataset has no true models");
  }
  require(per_user.size() == truth.shards.size(), "normalized_mse: one model per user required");
  const int d = truth.feature_dim;
  double total = 0.0;
  for (std::size_t i = 0; i < per_user.size(); ++i) {
    const int k = truth.true_assignment[i];
    const bool icpt = per_user[i].size() == d + 1;
    require(icpt || per_user[i].size() == d, "normalized_mse: model dimension mismatch");
    const Vec star = truth.true_params(k, icpt);
    const double nrm = star.squaredNorm();
    if (!(nrm > 0.0)) {
      throw InvalidArgument("normalized_mse: true model of cluster " + std::to_string(k) +
                            " has zero norm");
    }
    total += (per_user[i] - star).squaredNorm() / nrm;
  }
  return total / static_cast<double>(per_user.size());
}

inline double normalized_mse(const ProtocolOutput& out, const FederatedDataset& truth) {
  return normalized_mse(out.per_user_models, truth);
}

// Fraction of `set` classified correctly by sign(<x, w> + b), sign(0) = +1.
inline double accuracy_on(const Vec& params, const LabeledSet& set, bool has_intercept) {
  const Index d = set.dim();
  require(params.size() == d + (has_intercept ? 1 : 0), "accuracy: model dimension mismatch");
  require(set.size() > 0, "accuracy: empty test set");
  Vec z = set.features * params.head(d);
  if (has_intercept) {
    z.array() += params[d];
  }
  Index correct = 0;
  for (Index j = 0; j < z.size(); ++j) {
    const double pred = z[j] >= 0.0 ? 1.0 : -1.0;
    correct += pred == set.labels[j] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

// Mean over users of the accuracy on their cluster's withheld set.
inline double test_accuracy(const std::vector<Vec>& per_user, const FederatedDataset& data,
                            const LossSpec& loss) {
  if (loss.kind != LossKind::kLogistic) {
    throw InvalidArgument("test_accuracy: requires a classification loss");
  }
  if (!data.has_test_sets()) {
    throw InvalidArgument("test_accuracy: dataset has no test sets");
  }
  require(per_user.size() == data.shards.size(), "test_accuracy: one model per user required");
  double total = 0.0;
  for (std::size_t i = 0; i < per_user.size(); ++i) {
    const auto k = static_cast<std::size_t>(data.true_assignment[i]);
    require(k < data.test_sets.size(), "test_accuracy: missing test set for a cluster");
    total += accuracy_on(per_user[i], data.test_sets[k], loss.has_intercept);
  }
  return total / static_cast<double>(per_user.size());
}

inline double test_accuracy(const ProtocolOutput& out, const FederatedDataset& data,
                            const LossSpec& loss) {
  return test_accuracy(out.per_user_models, data, loss);
}

// Maximum-weight assignment on a (rows x cols) weight matrix; returns for
// each row the matched column or -1. Hungarian method on the padded square
// cost matrix.
inline std::vector<int> max_weight_matching(const Mat& weight) {
  const Index r = weight.rows();
  const Index c = weight.cols();
  const Index n = std::max(r, c);
  Mat cost = Mat::Zero(n, n);
  const double top = weight.size() ? weight.maxCoeff() : 0.0;
  cost.topLeftCorner(r, c) = (top - weight.array()).matrix();
  if (r < n || c < n) {
    // padded cells cost as much as a zero-weight match
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i >= r || j >= c) {
          cost(i, j) = top;
        }
      }
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          continue;
        }
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(static_cast<std::size_t>(r), -1);
  for (Index j = 1; j <= n; ++j) {
    const Index i = p[static_cast<std::size_t>(j)];
    if (i >= 1 && i <= r && j <= c) {
      match[static_cast<std::size_t>(i - 1)] = static_cast<int>(j - 1);
    }
  }
  return match;
}

struct RecoveryStats {
  bool exact = false;
  Mat overlap;  // K' x K counts |C'_k ∩ C_l|
  Mat eps;      // K' x K fractions |C'_k ∩ C_l| / |C'_k|
  int k_prime = 0;
  std::vector<int> matching;  // predicted cluster -> matched true cluster (-1 if none)

  // Sum over l != matched(k) of eps(k, l).
  double contamination(int k) const {
    const int mk = matching[static_cast<std::size_t>(k)];
    double s = eps.row(k).sum();
    if (mk >= 0) {
      s -= eps(k, mk);
    }
    return s;
  }
};

inline RecoveryStats recovery_stats(const Assignment& predicted, const Assignment& truth) {
  if (predicted.size() != truth.size()) {
    throw InvalidArgument("recovery_stats: predicted and true assignments cover different users");
  }
  require(!predicted.empty(), "recovery_stats: empty assignment");
  const Assignment pred = canonical(predicted);
  const int Kp = count_clusters(pred);
  const int K = count_clusters(truth);
  RecoveryStats st;
  st.k_prime = Kp;
  st.overlap = Mat::Zero(Kp, K);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    require(truth[i] >= 0, "recovery_stats: negative true label");
    st.overlap(pred[i], truth[i]) += 1.0;
  }
  st.eps = st.overlap;
  for (int k = 0; k < Kp; ++k) {
    st.eps.row(k) /= st.overlap.row(k).sum();
  }
  st.matching = max_weight_matching(st.overlap);
  double matched = 0.0;
  for (int k = 0; k < Kp; ++k) {
    if (st.matching[static_cast<std::size_t>(k)] >= 0) {
      matched += st.overlap(k, st.matching[static_cast<std::size_t>(k)]);
    }
  }
  st.exact = Kp == K && matched == static_cast<double>(pred.size());
  return st;
}

inline RecoveryStats recovery_stats(const ClusteringResult& result, const Assignment& truth) {
  return recovery_stats(result.assignment, truth);
}

// Least-squares slope of log(mse) against log(n).
inline double decay_slope(const std::vector<std::pair<double, double>>& points) {
  require(points.size() >= 3, "decay_slope: need at least 3 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(points[i].first > 0.0, "decay_slope: n must be positive");
    if (!(points[i].second > 0.0)) {
      throw InvalidArgument("decay_slope: nonpositive mse at point " + std::to_string(i));
    }
    require(i == 0 || points[i].first > points[i - 1].first,
            "decay_slope: n must be strictly increasing");
  }
  const double N = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [n, e] : points) {
    sx += std::log(n);
    sy += std::log(e);
  }
  const double mx = sx / N;
  const double my = sy / N;
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [n, e] : points) {
    sxy += (std::log(n) - mx) * (std::log(e) - my);
    sxx += (std::log(n) - mx) * (std::log(n) - mx);
  }
  return sxy / sxx;
}

}  // namespace odcl
