#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "odcl/odcl.hpp"

using namespace odcl;

namespace {

FederatedDataset with_models(std::vector<Vec> models, Assignment truth) {
  FederatedDataset ds;
  ds.feature_dim = static_cast<int>(models.front().size());
  ds.true_models = std::move(models);
  ds.true_assignment = std::move(truth);
  for (std::size_t i = 0; i < ds.true_assignment.size(); ++i) {
    UserShard s;
    s.features = Mat::Zero(1, ds.feature_dim);
    s.labels = Vec::Zero(1);
    s.user_id = static_cast<int>(i);
    ds.shards.push_back(s);
  }
  return ds;
}

LabeledSet balanced_line() {
  LabeledSet s;
  s.features.resize(4, 1);
  s.features << -2.0, -1.0, 1.0, 2.0;
  s.labels.resize(4);
  s.labels << -1.0, -1.0, 1.0, 1.0;
  return s;
}

// Brute force over all injective maps of predicted clusters onto true ones.
double best_matching_weight(const Mat& w) {
  const int r = static_cast<int>(w.rows());
  const int c = static_cast<int>(w.cols());
  std::vector<int> cols(static_cast<std::size_t>(std::max(r, c)));
  std::iota(cols.begin(), cols.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (int i = 0; i < r; ++i) {
      const int j = cols[static_cast<std::size_t>(i)];
      if (j < c) {
        s += w(i, j);
      }
    }
    best = std::max(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace

TEST(NormalizedMse, Examples) {
  Vec u(2);
  u << 3.0, 4.0;
  const auto one = with_models({u}, {0});
  EXPECT_EQ(normalized_mse(std::vector<Vec>{u}, one), 0.0);
  EXPECT_DOUBLE_EQ(normalized_mse(std::vector<Vec>{2.0 * u}, one), 1.0);

  Vec v(2);
  v << -1.0, 0.5;
  const auto two = with_models({u, v}, {0, 1});
  EXPECT_DOUBLE_EQ(normalized_mse(std::vector<Vec>{u, Vec::Zero(2)}, two), 0.5);
}

TEST(NormalizedMse, InterceptIsPartOfTheModel) {
  Vec u(1);
  u << 3.0;
  auto ds = with_models({u}, {0});
  ds.true_intercepts = std::vector<double>{4.0};
  Vec est(2);
  est << 3.0, 0.0;
  EXPECT_DOUBLE_EQ(normalized_mse(std::vector<Vec>{est}, ds), 16.0 / 25.0);
}

TEST(NormalizedMse, Errors) {
  Vec u = Vec::Ones(2);
  auto ds = with_models({u}, {0});
  EXPECT_THROW(normalized_mse(std::vector<Vec>{u, u}, ds), InvalidArgument);
  EXPECT_THROW(normalized_mse(std::vector<Vec>{Vec::Ones(3)}, with_models({Vec::Ones(5)}, {0})),
               InvalidArgument);
  auto zero = with_models({Vec::Zero(2)}, {0});
  EXPECT_THROW(normalized_mse(std::vector<Vec>{u}, zero), InvalidArgument);
  ds.true_models.reset();
  EXPECT_THROW(normalized_mse(std::vector<Vec>{u}, ds), InvalidArgument);
}

TEST(Accuracy, Examples) {
  const auto set = balanced_line();
  Vec w(1);
  w << 1.0;
  EXPECT_EQ(accuracy_on(w, set, false), 1.0);
  EXPECT_EQ(accuracy_on(Vec::Zero(1), set, false), 0.5);
  EXPECT_EQ(accuracy_on(Vec::Zero(2), set, true), 0.5);
  for (const double b : {-1.5, -0.5, 0.3, 1.7}) {
    Vec p(2);
    p << 0.7, b;
    EXPECT_DOUBLE_EQ(accuracy_on(p, set, true) + accuracy_on(-p, set, true), 1.0) << "b " << b;
  }
}

TEST(Accuracy, ClusterOracleOnSeparableFlip) {
  const auto pool = gen_two_class_pool(5, 200, 8.0, 3);
  const auto data = shard_label_flip(pool, 10, 20, 3);
  const LossSpec loss{LossKind::kLogistic, 1e-3, true, 1e3};
  const auto co = baseline_cluster_oracle(data, loss);
  EXPECT_DOUBLE_EQ(test_accuracy(co, data, loss), 1.0);
}

TEST(Accuracy, Errors) {
  const auto pool = gen_two_class_pool(3, 50, 2.0, 1);
  const auto data = shard_label_flip(pool, 4, 4, 1);
  const std::vector<Vec> models(4, Vec::Zero(4));
  EXPECT_THROW(test_accuracy(models, data, LossSpec{}), InvalidArgument);
  const LossSpec logistic{LossKind::kLogistic, 0.0, true, 10.0};
  auto no_test = data;
  no_test.test_sets.clear();
  EXPECT_THROW(test_accuracy(models, no_test, logistic), InvalidArgument);
  EXPECT_THROW(accuracy_on(Vec::Zero(5), balanced_line(), true), InvalidArgument);
}

TEST(RecoveryStats, IdenticalUpToLabels) {
  const Assignment truth{0, 0, 1, 1, 2, 2};
  const auto st = recovery_stats(Assignment{2, 2, 0, 0, 1, 1}, truth);
  EXPECT_TRUE(st.exact);
  EXPECT_EQ(st.k_prime, 3);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(st.contamination(k), 0.0);
    EXPECT_EQ(st.eps(k, st.matching[static_cast<std::size_t>(k)]), 1.0);
  }
}

TEST(RecoveryStats, OneUserMoved) {
  const Assignment truth{0, 0, 0, 1, 1, 1};
  const auto st = recovery_stats(Assignment{0, 0, 1, 1, 1, 1}, truth);
  EXPECT_FALSE(st.exact);
  int off = 0;
  double off_total = 0.0;
  for (int k = 0; k < 2; ++k) {
    for (int l = 0; l < 2; ++l) {
      if (l != st.matching[static_cast<std::size_t>(k)]) {
        off += st.overlap(k, l) > 0 ? 1 : 0;
        off_total += st.overlap(k, l);
      }
    }
  }
  EXPECT_EQ(off, 1);
  EXPECT_EQ(off_total, 1.0);
}

TEST(RecoveryStats, DifferentClusterCounts) {
  const Assignment truth{0, 0, 1, 1, 2, 2};
  for (const Assignment& pred : {Assignment{0, 0, 0, 0, 1, 1}, Assignment{0, 1, 2, 3, 4, 4}}) {
    const auto st = recovery_stats(pred, truth);
    EXPECT_FALSE(st.exact);
    EXPECT_EQ(st.k_prime, count_clusters(pred));
    EXPECT_EQ(st.overlap.rows(), st.k_prime);
    EXPECT_EQ(st.overlap.cols(), 3);
    EXPECT_EQ(st.overlap.sum(), 6.0);
  }
}

TEST(RecoveryStats, InvariantsOnRandomAssignments) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    odcl::Rng rng(seed, {Domain::kMisc, 20});
    const int m = 5 + static_cast<int>(rng.index(20));
    const int K = 1 + static_cast<int>(rng.index(4));
    const int Kp = 1 + static_cast<int>(rng.index(5));
    Assignment truth(static_cast<std::size_t>(m)), pred(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      truth[static_cast<std::size_t>(i)] = i < K ? i : static_cast<int>(rng.index(static_cast<std::uint64_t>(K)));
      pred[static_cast<std::size_t>(i)] = static_cast<int>(rng.index(static_cast<std::uint64_t>(Kp)));
    }
    const auto st = recovery_stats(pred, truth);
    const auto groups = members(canonical(pred));
    for (int k = 0; k < st.k_prime; ++k) {
      EXPECT_EQ(st.overlap.row(k).sum(), static_cast<double>(groups[static_cast<std::size_t>(k)].size()));
      EXPECT_NEAR(st.eps.row(k).sum(), 1.0, 1e-12);
      EXPECT_GE(st.eps.row(k).minCoeff(), 0.0);
      EXPECT_LE(st.eps.row(k).maxCoeff(), 1.0);
    }
    double matched = 0.0;
    std::vector<int> used;
    for (int k = 0; k < st.k_prime; ++k) {
      const int l = st.matching[static_cast<std::size_t>(k)];
      if (l >= 0) {
        matched += st.overlap(k, l);
        EXPECT_EQ(std::count(used.begin(), used.end(), l), 0);
        used.push_back(l);
      }
    }
    EXPECT_DOUBLE_EQ(matched, best_matching_weight(st.overlap)) << "seed " << seed;
    EXPECT_EQ(st.exact, same_partition(pred, truth));

    // relabel the prediction with a permutation
    std::vector<int> relabel(static_cast<std::size_t>(Kp));
    std::iota(relabel.begin(), relabel.end(), 0);
    std::reverse(relabel.begin(), relabel.end());
    Assignment moved = pred;
    for (auto& c : moved) {
      c = relabel[static_cast<std::size_t>(c)];
    }
    const auto st2 = recovery_stats(moved, truth);
    EXPECT_EQ(st2.exact, st.exact);
    EXPECT_EQ(st2.overlap, st.overlap);
  }
}

TEST(RecoveryStats, SizeMismatchIsAnError) {
  EXPECT_THROW(recovery_stats(Assignment{0, 1}, Assignment{0, 1, 1}), InvalidArgument);
}

TEST(MaxWeightMatching, Rectangular) {
  Mat w(2, 3);
  w << 1, 5, 0,
       4, 6, 0;
  const auto m = max_weight_matching(w);
  EXPECT_EQ(m[0], 1);
  EXPECT_EQ(m[1], 0);
  Mat t = w.transpose();
  const auto mt = max_weight_matching(t);
  EXPECT_EQ(mt[0], 1);
  EXPECT_EQ(mt[1], 0);
}

TEST(DecaySlope, Examples) {
  std::vector<std::pair<double, double>> inv, flat;
  for (const double n : {100.0, 200.0, 400.0, 800.0}) {
    inv.emplace_back(n, 3.7 / n);
    flat.emplace_back(n, 0.2);
  }
  EXPECT_NEAR(decay_slope(inv), -1.0, 1e-9);
  EXPECT_NEAR(decay_slope(flat), 0.0, 1e-12);
}

TEST(DecaySlope, Errors) {
  EXPECT_THROW(decay_slope({{1.0, 1.0}, {2.0, 1.0}}), InvalidArgument);
  EXPECT_THROW(decay_slope({{1.0, 1.0}, {2.0, 0.0}, {3.0, 1.0}}), InvalidArgument);
  EXPECT_THROW(decay_slope({{1.0, 1.0}, {1.0, 2.0}, {3.0, 1.0}}), InvalidArgument);
}

TEST(DecaySlope, OracleAveragingOnLinearSetup) {
  std::vector<std::pair<double, double>> pts;
  for (int n = 100; n <= 1000; n += 100) {
    std::vector<double> mse;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto data = gen_linear_clusters(
          linear_config(10, 100, n, 20, ten_cluster_intervals(), 5, seed));
      mse.push_back(normalized_mse(baseline_oracle_avg(data, LossSpec{}), data));
    }
    std::sort(mse.begin(), mse.end());
    pts.emplace_back(n, mse[2]);
  }
  const double slope = decay_slope(pts);
  EXPECT_GE(slope, -1.2);
  EXPECT_LE(slope, -0.8);
}

TEST(Pooling, ClusterOracleBeatsLocalInMedian) {
  std::vector<double> co, loc;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = gen_linear_clusters(
        linear_config(10, 100, 100, 20, ten_cluster_intervals(), 5, seed));
    co.push_back(normalized_mse(baseline_cluster_oracle(data, LossSpec{}), data));
    loc.push_back(normalized_mse(baseline_local(data, LossSpec{}), data));
  }
  std::sort(co.begin(), co.end());
  std::sort(loc.begin(), loc.end());
  EXPECT_LE(co[5], loc[5]);
}
