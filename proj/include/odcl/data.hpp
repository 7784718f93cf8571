#pragma once

// Federations of users with a planted cluster structure: synthetic
// generators, labeled-table ingestion, label-flip sharding and on-disk
// export/import.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "odcl/csv.hpp"
#include "odcl/rng.hpp"
#include "odcl/types.hpp"

namespace odcl {

struct UserShard {
  Mat features;  // n x d
  Vec labels;    // n
  int user_id = 0;
  int cluster_id = 0;  // ground truth, never read by the protocol

  Index size() const { return features.rows(); }
};

// A flat pool of labeled examples.
struct LabeledSet {
  Mat features;
  Vec labels;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
};

struct FederatedDataset {
  std::vector<UserShard> shards;
  Assignment true_assignment;
  std::optional<std::vector<Vec>> true_models;
  std::optional<std::vector<double>> true_intercepts;
  int feature_dim = 0;
  std::vector<LabeledSet> test_sets;  // one per cluster when present
  std::uint64_t seed = 0;

  int num_users() const { return static_cast<int>(shards.size()); }
  int num_clusters() const { return count_clusters(true_assignment); }
  Index samples_per_user() const { return shards.empty() ? 0 : shards.front().size(); }
  bool has_test_sets() const { return !test_sets.empty(); }

  // Throws InvalidArgument naming the first violated invariant.
  void validate() const {
    require(!shards.empty(), "dataset: no shards");
    require(feature_dim > 0, "dataset: feature_dim must be positive");
    require(true_assignment.size() == shards.size(),
            "dataset: true_assignment must cover every user");
    const int K = num_clusters();
    std::vector<int> sizes(static_cast<std::size_t>(K), 0);
    for (std::size_t i = 0; i < shards.size(); ++i) {
      const auto& s = shards[i];
      require(s.features.cols() == feature_dim,
              "dataset: shard " + std::to_string(i) + " has wrong feature_dim");
      require(s.features.rows() >= 1 && s.labels.size() == s.features.rows(),
              "dataset: shard " + std::to_string(i) + " is empty or ragged");
      require(true_assignment[i] >= 0, "dataset: negative cluster label");
      ++sizes[static_cast<std::size_t>(true_assignment[i])];
    }
    for (int k = 0; k < K; ++k) {
      require(sizes[static_cast<std::size_t>(k)] > 0,
              "dataset: cluster " + std::to_string(k) + " has no users");
    }
    if (true_models) {
      require(static_cast<int>(true_models->size()) == K,
              "dataset: need one true model per cluster");
      for (int k = 0; k < K; ++k) {
        for (int l = k + 1; l < K; ++l) {
          require(((*true_models)[static_cast<std::size_t>(k)] -
                   (*true_models)[static_cast<std::size_t>(l)])
                          .norm() > 0.0,
                  "dataset: true models of distinct clusters coincide (D = 0)");
        }
      }
    }
  }

  // Flat true parameter vector of cluster k (weights, then intercept if
  // `with_intercept`).
  Vec true_params(int k, bool with_intercept) const {
    require(true_models.has_value(), "dataset: true models absent");
    const Vec& w = (*true_models)[static_cast<std::size_t>(k)];
    if (!with_intercept) {
      return w;
    }
    Vec out(w.size() + 1);
    out.head(w.size()) = w;
    out[w.size()] = true_intercepts ? (*true_intercepts)[static_cast<std::size_t>(k)] : 0.0;
    return out;
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// How true cluster models are produced: independent uniform components on a
// per-cluster interval, or given explicitly.
struct ModelLaw {
  std::vector<Interval> intervals;
  std::vector<Vec> explicit_models;
  std::vector<double> intercepts;  // optional, per cluster
};

struct GenConfig {
  int K = 1;
  int m = 1;
  int n = 1;
  int d = 1;
  std::vector<int> cluster_sizes;
  ModelLaw model_law;
  double noise_std = 1.0;
  int feature_sparsity = 1;
  std::uint64_t seed = 0;
  int test_size = 1000;

  void validate() const {
    require(K >= 1, "GenConfig.K must be positive");
    require(m >= 1, "GenConfig.m must be positive");
    require(n >= 1, "GenConfig.n must be positive");
    require(d >= 1, "GenConfig.d must be positive");
    require(static_cast<int>(cluster_sizes.size()) == K,
            "GenConfig.cluster_sizes must have K entries");
    long total = 0;
    for (int s : cluster_sizes) {
      require(s >= 1, "GenConfig.cluster_sizes entries must be positive");
      total += s;
    }
    require(total == m, "GenConfig.cluster_sizes must sum to m");
    const bool by_interval = !model_law.intervals.empty();
    const bool by_vector = !model_law.explicit_models.empty();
    require(by_interval != by_vector,
            "GenConfig.model_law needs exactly one of intervals or explicit models");
    if (by_interval) {
      require(static_cast<int>(model_law.intervals.size()) == K,
              "GenConfig.model_law needs one interval per cluster");
      for (const auto& iv : model_law.intervals) {
        require(iv.lo <= iv.hi, "GenConfig.model_law interval has lo > hi");
      }
    } else {
      require(static_cast<int>(model_law.explicit_models.size()) == K,
              "GenConfig.model_law needs one model per cluster");
      for (const auto& v : model_law.explicit_models) {
        require(v.size() == d, "GenConfig.model_law model has wrong dimension");
      }
    }
    require(model_law.intercepts.empty() ||
                static_cast<int>(model_law.intercepts.size()) == K,
            "GenConfig.model_law.intercepts must be empty or have K entries");
    require(noise_std >= 0.0, "GenConfig.noise_std must be nonnegative");
    require(feature_sparsity >= 1 && feature_sparsity <= d,
            "GenConfig.feature_sparsity must be in [1, d]");
    require(test_size >= 0, "GenConfig.test_size must be nonnegative");
  }
};

inline std::vector<int> balanced_sizes(int m, int K) {
  require(K >= 1 && m >= K, "balanced_sizes: need 1 <= K <= m");
  std::vector<int> sizes(static_cast<std::size_t>(K), m / K);
  for (int k = 0; k < m % K; ++k) {
    ++sizes[static_cast<std::size_t>(k)];
  }
  return sizes;
}

// Ten clusters on [1,2], [4,5], ..., [13,14] and their negatives.
inline std::vector<Interval> ten_cluster_intervals() {
  std::vector<Interval> out;
  for (int k = 0; k < 5; ++k) {
    out.push_back({1.0 + 3.0 * k, 2.0 + 3.0 * k});
  }
  for (int k = 0; k < 5; ++k) {
    out.push_back({-2.0 - 3.0 * k, -1.0 - 3.0 * k});
  }
  return out;
}

inline std::vector<Interval> four_cluster_intervals() {
  return {{0.0, 1.0}, {1.0, 2.0}, {-1.0, 0.0}, {-2.0, -1.0}};
}

inline GenConfig linear_config(int K, int m, int n, int d, std::vector<Interval> intervals,
                               int sparsity, std::uint64_t seed) {
  GenConfig cfg;
  cfg.K = K;
  cfg.m = m;
  cfg.n = n;
  cfg.d = d;
  cfg.cluster_sizes = balanced_sizes(m, K);
  cfg.model_law.intervals = std::move(intervals);
  cfg.noise_std = 1.0;
  cfg.feature_sparsity = sparsity;
  cfg.seed = seed;
  return cfg;
}

namespace detail {

inline Assignment contiguous_assignment(const std::vector<int>& sizes) {
  Assignment a;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    a.insert(a.end(), static_cast<std::size_t>(sizes[k]), static_cast<int>(k));
  }
  return a;
}

inline std::vector<Vec> draw_models(const GenConfig& cfg) {
  std::vector<Vec> models;
  for (int k = 0; k < cfg.K; ++k) {
    if (!cfg.model_law.explicit_models.empty()) {
      models.push_back(cfg.model_law.explicit_models[static_cast<std::size_t>(k)]);
      continue;
    }
    Rng rng(cfg.seed, {Domain::kClusterModel, static_cast<std::uint64_t>(k)});
    const auto& iv = cfg.model_law.intervals[static_cast<std::size_t>(k)];
    Vec u(cfg.d);
    for (int j = 0; j < cfg.d; ++j) {
      u[j] = rng.uniform(iv.lo, iv.hi);
    }
    models.push_back(std::move(u));
  }
  return models;
}

// Sparse Gaussian row: s components chosen without replacement, rest zero.
inline void sparse_gaussian_row(Rng& rng, int d, int s, Eigen::Ref<Vec> row) {
  row.setZero();
  std::vector<int> idx(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    idx[static_cast<std::size_t>(j)] = j;
  }
  for (int j = 0; j < s; ++j) {
    const auto pick = j + static_cast<int>(rng.index(static_cast<std::uint64_t>(d - j)));
    std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(pick)]);
    row[idx[static_cast<std::size_t>(j)]] = rng.normal();
  }
}

inline LabeledSet linear_samples(Rng& rng, const Vec& model, int count, int s,
                                 double noise_std) {
  const auto d = static_cast<int>(model.size());
  LabeledSet out{Mat::Zero(count, d), Vec::Zero(count)};
  Vec row(d);
  for (int j = 0; j < count; ++j) {
    sparse_gaussian_row(rng, d, s, row);
    out.features.row(j) = row.transpose();
    out.labels[j] = row.dot(model) + noise_std * rng.normal();
  }
  return out;
}

inline std::vector<Vec> draw_and_check_models(const GenConfig& cfg) {
  auto models = draw_models(cfg);
  for (int k = 0; k < cfg.K; ++k) {
    for (int l = k + 1; l < cfg.K; ++l) {
      require((models[static_cast<std::size_t>(k)] - models[static_cast<std::size_t>(l)])
                      .norm() > 0.0,
              "GenConfig.model_law produced coinciding cluster models (D = 0)");
    }
  }
  return models;
}

}  // namespace detail

// Linear-regression federation: y = <x, u_k> + noise with s-sparse Gaussian x.
inline FederatedDataset gen_linear_clusters(const GenConfig& cfg) {
  cfg.validate();
  FederatedDataset ds;
  ds.feature_dim = cfg.d;
  ds.seed = cfg.seed;
  ds.true_assignment = detail::contiguous_assignment(cfg.cluster_sizes);
  auto models = detail::draw_and_check_models(cfg);
  for (int i = 0; i < cfg.m; ++i) {
    const int k = ds.true_assignment[static_cast<std::size_t>(i)];
    Rng rng(cfg.seed, {Domain::kUserShard, static_cast<std::uint64_t>(i)});
    auto set = detail::linear_samples(rng, models[static_cast<std::size_t>(k)], cfg.n,
                                      cfg.feature_sparsity, cfg.noise_std);
    ds.shards.push_back({std::move(set.features), std::move(set.labels), i, k});
  }
  if (cfg.test_size > 0) {
    for (int k = 0; k < cfg.K; ++k) {
      Rng rng(cfg.seed, {Domain::kTestSet, static_cast<std::uint64_t>(k)});
      ds.test_sets.push_back(detail::linear_samples(rng, models[static_cast<std::size_t>(k)],
                                                    cfg.test_size, cfg.feature_sparsity,
                                                    cfg.noise_std));
    }
  }
  ds.true_models = std::move(models);
  if (!cfg.model_law.intercepts.empty()) {
    ds.true_intercepts = cfg.model_law.intercepts;
  }
  return ds;
}

// Symmetric square root factor L with L L^T = cov; throws if cov is not PSD.
inline Mat psd_factor(const Mat& cov) {
  require(cov.rows() == cov.cols(), "covariance must be square");
  require((cov - cov.transpose()).cwiseAbs().maxCoeff() <=
              1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()),
          "covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  const Vec& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  require(ev.minCoeff() >= -1e-10 * scale,
          "covariance is not positive semidefinite (min eigenvalue " +
              std::to_string(ev.minCoeff()) + ")");
  return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

inline double sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Logistic federation: x ~ N(center_k, cov_k), y = 2 Bernoulli(p) - 1 with
// p = sigmoid(<x, theta_k> + b_k). Ignores cfg.feature_sparsity and cfg.noise_std.
inline FederatedDataset gen_logistic_clusters(const GenConfig& cfg,
                                              const std::vector<Mat>& covariances,
                                              const std::vector<Vec>& centers) {
  cfg.validate();
  require(static_cast<int>(covariances.size()) == cfg.K,
          "gen_logistic_clusters: need one covariance per cluster");
  require(static_cast<int>(centers.size()) == cfg.K,
          "gen_logistic_clusters: need one center per cluster");
  std::vector<Mat> factors;
  for (int k = 0; k < cfg.K; ++k) {
    const auto& cov = covariances[static_cast<std::size_t>(k)];
    require(cov.rows() == cfg.d && centers[static_cast<std::size_t>(k)].size() == cfg.d,
            "gen_logistic_clusters: dimension mismatch in cluster " + std::to_string(k));
    factors.push_back(psd_factor(cov));
  }
  FederatedDataset ds;
  ds.feature_dim = cfg.d;
  ds.seed = cfg.seed;
  ds.true_assignment = detail::contiguous_assignment(cfg.cluster_sizes);
  auto models = detail::draw_and_check_models(cfg);
  std::vector<double> intercepts = cfg.model_law.intercepts;
  if (intercepts.empty()) {
    intercepts.assign(static_cast<std::size_t>(cfg.K), 0.0);
  }

  auto sample = [&](Rng& rng, int k, int count) {
    const auto ku = static_cast<std::size_t>(k);
    LabeledSet out{Mat(count, cfg.d), Vec(count)};
    Vec z(cfg.d);
    for (int j = 0; j < count; ++j) {
      for (int c = 0; c < cfg.d; ++c) {
        z[c] = rng.normal();
      }
      const Vec x = centers[ku] + factors[ku] * z;
      out.features.row(j) = x.transpose();
      const double p = sigmoid(x.dot(models[ku]) + intercepts[ku]);
      out.labels[j] = rng.bernoulli(p) ? 1.0 : -1.0;
    }
    return out;
  };

  for (int i = 0; i < cfg.m; ++i) {
    const int k = ds.true_assignment[static_cast<std::size_t>(i)];
    Rng rng(cfg.seed, {Domain::kUserShard, static_cast<std::uint64_t>(i)});
    auto set = sample(rng, k, cfg.n);
    ds.shards.push_back({std::move(set.features), std::move(set.labels), i, k});
  }
  if (cfg.test_size > 0) {
    for (int k = 0; k < cfg.K; ++k) {
      Rng rng(cfg.seed, {Domain::kTestSet, static_cast<std::uint64_t>(k)});
      ds.test_sets.push_back(sample(rng, k, cfg.test_size));
    }
  }
  ds.true_models = std::move(models);
  ds.true_intercepts = std::move(intercepts);
  return ds;
}

// Four-cluster two-dimensional logistic design. The third covariance is
// listed as [[1,2],[2,1]] in the source design, which is indefinite; we use
// its matrix absolute value [[2,1],[1,2]] (what an SVD-based sampler draws).
struct LogisticDesign {
  GenConfig cfg;
  std::vector<Mat> covariances;
  std::vector<Vec> centers;
};

inline LogisticDesign four_cluster_logistic_design(int m, int n, std::uint64_t seed) {
  LogisticDesign out;
  auto& cfg = out.cfg;
  cfg.K = 4;
  cfg.m = m;
  cfg.n = n;
  cfg.d = 2;
  cfg.cluster_sizes = balanced_sizes(m, 4);
  cfg.model_law.explicit_models = {Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), Vec::Zero(2)};
  cfg.model_law.explicit_models[0] << 1.0, -1.0;
  cfg.model_law.explicit_models[1] << 1.0, 0.0;
  cfg.model_law.explicit_models[2] << -1.0, 1.0;
  cfg.model_law.explicit_models[3] << 0.0, -1.0;
  cfg.model_law.intercepts = {0.0, 0.0, 0.0, 0.0};
  cfg.feature_sparsity = 2;
  cfg.seed = seed;
  Mat s1(2, 2), s2(2, 2), s3(2, 2), s4(2, 2);
  s1 << 1, 0, 0, 1;
  s2 << 2, 1, 1, 2;
  s3 << 2, 1, 1, 2;
  s4 << 2, 0, 0, 2;
  out.covariances = {s1, s2, s3, s4};
  out.centers.assign(4, Vec::Zero(2));
  return out;
}

// Header handling for ingest_labeled_table.
enum class HeaderMode { kNone, kPresent, kAuto };

struct TableSchema {
  HeaderMode header = HeaderMode::kAuto;
  char delimiter = ',';
};

// Reads "f1,...,fd,label" rows. Blank lines are skipped; line numbers in
// errors are 1-based physical lines.
inline LabeledSet ingest_labeled_table(const std::filesystem::path& path,
                                       const TableSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot read table '" + path.string() + "'");
  }
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::is_blank(line)) {
      continue;
    }
    const auto cells = csv::split(line, schema.delimiter);
    if (!header_seen && rows.empty()) {
      header_seen = true;
      if (schema.header == HeaderMode::kPresent) {
        continue;
      }
      if (schema.header == HeaderMode::kAuto) {
        bool numeric = true;
        for (auto c : cells) {
          numeric = numeric && csv::parse_double(c).has_value();
        }
        if (!numeric) {
          continue;
        }
      }
    }
    if (width == 0) {
      if (cells.size() < 2) {
        throw ParseError("line " + std::to_string(lineno) +
                         ": need at least one feature and a label");
      }
      width = cells.size();
    } else if (cells.size() != width) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(width) + " fields, got " +
                       std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(width);
    for (auto c : cells) {
      auto v = csv::parse_double(c);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("line " + std::to_string(lineno) + ": non-numeric cell '" +
                         std::string(c) + "'");
      }
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw ParseError("no data rows in '" + path.string() + "'");
  }
  const auto n = static_cast<Index>(rows.size());
  const auto d = static_cast<Index>(width - 1);
  LabeledSet out{Mat(n, d), Vec(n)};
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (Index j = 0; j < d; ++j) {
      out.features(i, j) = r[static_cast<std::size_t>(j)];
    }
    out.labels[i] = r.back();
  }
  return out;
}

inline void write_labeled_table(const std::filesystem::path& path, const Mat& features,
                                const Vec& labels) {
  std::ofstream out(path);
  if (!out) {
    throw ParseError("cannot write '" + path.string() + "'");
  }
  std::vector<double> row(static_cast<std::size_t>(features.cols() + 1));
  for (Index i = 0; i < features.rows(); ++i) {
    for (Index j = 0; j < features.cols(); ++j) {
      row[static_cast<std::size_t>(j)] = features(i, j);
    }
    row.back() = labels[i];
    csv::write_row(out, row);
  }
}

// Two clusters of m/2 users; each user draws n examples without replacement,
// split evenly between the two source classes where the pool allows, and
// users of the second cluster see negated labels. The remaining examples
// form each cluster's test set (labels per that cluster).
inline FederatedDataset shard_label_flip(const LabeledSet& examples, int m, int n,
                                         std::uint64_t seed) {
  require(m >= 2 && m % 2 == 0, "shard_label_flip: m must be even and >= 2");
  require(n >= 1, "shard_label_flip: n must be positive");
  require(examples.size() > 0, "shard_label_flip: empty pool");
  if (static_cast<long>(m) * n > examples.size()) {
    throw InvalidArgument("shard_label_flip: insufficient data (" +
                          std::to_string(static_cast<long>(m) * n) + " needed, " +
                          std::to_string(examples.size()) + " available)");
  }
  // classes by label value, in order of first appearance
  std::vector<double> class_label;
  std::vector<std::vector<Index>> pools;
  for (Index i = 0; i < examples.size(); ++i) {
    const double y = examples.labels[i];
    std::size_t c = 0;
    while (c < class_label.size() && class_label[c] != y) {
      ++c;
    }
    if (c == class_label.size()) {
      require(class_label.size() < 2, "shard_label_flip: pool has more than two classes");
      class_label.push_back(y);
      pools.emplace_back();
    }
    pools[c].push_back(i);
  }
  Rng rng(seed, {Domain::kSharding, 0});
  for (auto& pool : pools) {
    for (std::size_t j = pool.size(); j > 1; --j) {
      std::swap(pool[j - 1], pool[rng.index(j)]);
    }
  }
  std::vector<std::size_t> cursor(pools.size(), 0);
  auto take = [&](std::size_t c) {
    if (cursor[c] >= pools[c].size()) {
      c = 1 - c;
    }
    return pools[c][cursor[c]++];
  };

  FederatedDataset ds;
  ds.feature_dim = static_cast<int>(examples.dim());
  ds.seed = seed;
  for (int i = 0; i < m; ++i) {
    const int k = i < m / 2 ? 0 : 1;
    const double sign = k == 0 ? 1.0 : -1.0;
    UserShard s{Mat(n, examples.dim()), Vec(n), i, k};
    for (int j = 0; j < n; ++j) {
      // alternate classes; odd n gives the extra example to class (i mod 2)
      const std::size_t c = pools.size() == 1 ? 0 : static_cast<std::size_t>((j + i) % 2);
      const Index src = take(c);
      s.features.row(j) = examples.features.row(src);
      s.labels[j] = sign * examples.labels[src];
    }
    ds.shards.push_back(std::move(s));
    ds.true_assignment.push_back(k);
  }
  std::vector<Index> rest;
  for (std::size_t c = 0; c < pools.size(); ++c) {
    for (std::size_t j = cursor[c]; j < pools[c].size(); ++j) {
      rest.push_back(pools[c][j]);
    }
  }
  std::sort(rest.begin(), rest.end());
  if (!rest.empty()) {
    for (int k = 0; k < 2; ++k) {
      const double sign = k == 0 ? 1.0 : -1.0;
      LabeledSet t{Mat(static_cast<Index>(rest.size()), examples.dim()),
                   Vec(static_cast<Index>(rest.size()))};
      for (std::size_t j = 0; j < rest.size(); ++j) {
        t.features.row(static_cast<Index>(j)) = examples.features.row(rest[j]);
        t.labels[static_cast<Index>(j)] = sign * examples.labels[rest[j]];
      }
      ds.test_sets.push_back(std::move(t));
    }
  }
  return ds;
}

// Stand-in for a two-digit image pool: classes +1/-1 drawn from
// N(+/- mean_shift * e / sqrt(d), I) with e the all-ones direction.
inline LabeledSet gen_two_class_pool(int d, int per_class, double mean_shift,
                                     std::uint64_t seed) {
  require(d >= 1 && per_class >= 1, "gen_two_class_pool: invalid size");
  Rng rng(seed, {Domain::kMisc, 0});
  const Index n = 2 * static_cast<Index>(per_class);
  LabeledSet out{Mat(n, d), Vec(n)};
  const double shift = mean_shift / std::sqrt(static_cast<double>(d));
  for (Index i = 0; i < n; ++i) {
    const double y = i % 2 == 0 ? 1.0 : -1.0;
    for (int j = 0; j < d; ++j) {
      out.features(i, j) = y * shift + rng.normal();
    }
    out.labels[i] = y;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export / import: <dir>/manifest.json, <dir>/users/user_<i>.csv,
// <dir>/test/cluster_<k>.csv

namespace detail {
inline std::string numbered(const std::string& prefix, int i) {
  std::ostringstream os;
  os << prefix << std::setw(4) << std::setfill('0') << i << ".csv";
  return os.str();
}
}  // namespace detail

inline void export_dataset(const FederatedDataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "users");
  nlohmann::json manifest;
  manifest["format"] = "odcl-dataset";
  manifest["version"] = 1;
  manifest["rng"] = {{"name", kRngName}, {"version", kRngVersion}};
  manifest["K"] = ds.num_clusters();
  manifest["m"] = ds.num_users();
  manifest["n"] = ds.samples_per_user();
  manifest["d"] = ds.feature_dim;
  manifest["seed"] = ds.seed;
  manifest["true_assignment"] = ds.true_assignment;
  if (ds.true_models) {
    auto arr = nlohmann::json::array();
    for (const auto& u : *ds.true_models) {
      arr.push_back(std::vector<double>(u.data(), u.data() + u.size()));
    }
    manifest["true_models"] = arr;
  } else {
    manifest["true_models"] = nullptr;
  }
  if (ds.true_intercepts) {
    manifest["true_intercepts"] = *ds.true_intercepts;
  }
  auto users = nlohmann::json::array();
  for (const auto& s : ds.shards) {
    const auto name = "users/" + detail::numbered("user_", s.user_id);
    write_labeled_table(dir / name, s.features, s.labels);
    users.push_back(name);
  }
  manifest["users"] = users;
  auto tests = nlohmann::json::array();
  if (!ds.test_sets.empty()) {
    fs::create_directories(dir / "test");
    for (std::size_t k = 0; k < ds.test_sets.size(); ++k) {
      const auto name = "test/" + detail::numbered("cluster_", static_cast<int>(k));
      write_labeled_table(dir / name, ds.test_sets[k].features, ds.test_sets[k].labels);
      tests.push_back(name);
    }
  }
  manifest["test_sets"] = tests;
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

inline FederatedDataset import_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) {
    throw ParseError("cannot read manifest in '" + dir.string() + "'");
  }
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "odcl-dataset") {
    throw ParseError("manifest: not an odcl-dataset");
  }
  FederatedDataset ds;
  ds.feature_dim = manifest.at("d").get<int>();
  ds.seed = manifest.at("seed").get<std::uint64_t>();
  ds.true_assignment = manifest.at("true_assignment").get<Assignment>();
  if (!manifest.at("true_models").is_null()) {
    std::vector<Vec> models;
    for (const auto& row : manifest.at("true_models")) {
      const auto v = row.get<std::vector<double>>();
      models.push_back(Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size())));
    }
    ds.true_models = std::move(models);
  }
  if (manifest.contains("true_intercepts")) {
    ds.true_intercepts = manifest.at("true_intercepts").get<std::vector<double>>();
  }
  const TableSchema raw{HeaderMode::kNone, ','};
  int i = 0;
  for (const auto& name : manifest.at("users")) {
    auto t = ingest_labeled_table(dir / name.get<std::string>(), raw);
    ds.shards.push_back({std::move(t.features), std::move(t.labels), i,
                         ds.true_assignment.at(static_cast<std::size_t>(i))});
    ++i;
  }
  for (const auto& name : manifest.at("test_sets")) {
    ds.test_sets.push_back(ingest_labeled_table(dir / name.get<std::string>(), raw));
  }
  ds.validate();
  return ds;
}

}  // namespace odcl
