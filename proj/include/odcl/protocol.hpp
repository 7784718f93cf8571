#pragma once

// One-shot clustered learning: local ERM at every user, clustering of the
// local models at the server, cluster-wise averaging sent back to users.
// Also the comparison baselines and the iterative IFCA scheme.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "odcl/clustering.hpp"
#include "odcl/data.hpp"
#include "odcl/erm.hpp"
#include "odcl/parallel.hpp"

namespace odcl {

enum class ClusterAlgo { kConvex, kSpectral, kKmeansPP, kKmeansEstimated };

// How convex clustering obtains lambda.
enum class LambdaRule {
  kFixed,        // ProtocolConfig::lambda
  kTruthBounds,  // uniform in the a-posteriori bounds of the true partition, upper bound if empty
  kSeparability,        // uniform in the separability-derived interval, upper end if empty
  kClusterpath,  // lambda sweep with a-posteriori checks
};

enum class ErmMode { kExact, kSgd };

struct ProtocolConfig {
  ClusterAlgo algo = ClusterAlgo::kKmeansPP;
  LambdaRule lambda_rule = LambdaRule::kFixed;
  double lambda = 0.1;
  LambdaGrid grid;
  ConvexOptions convex;
  int K = 2;
  int restarts = 10;
  KMetric metric = KMetric::kSilhouette;
  int k_max = 10;
  double elbow_threshold = 0.1;
  ErmMode erm = ErmMode::kExact;
  SgdConfig sgd;
  bool sgd_auto_mu = true;  // per-user strong-convexity modulus for the step rule
  bool partial_spectral = false;
  bool diagnostic = false;  // also solve exactly and report eps_hat in SGD mode
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    require(!partial_spectral || algo == ClusterAlgo::kSpectral,
            "ProtocolConfig.partial_spectral requires the spectral algorithm");
    if (algo == ClusterAlgo::kConvex && lambda_rule == LambdaRule::kFixed) {
      require(lambda > 0.0, "ProtocolConfig.lambda must be positive");
    }
    if (algo == ClusterAlgo::kSpectral || algo == ClusterAlgo::kKmeansPP) {
      require(K >= 1, "ProtocolConfig.K must be >= 1");
    }
    if (algo == ClusterAlgo::kKmeansEstimated) {
      require(k_max >= 1, "ProtocolConfig.k_max must be >= 1");
    }
    require(restarts >= 1, "ProtocolConfig.restarts must be >= 1");
    if (erm == ErmMode::kSgd) {
      require(sgd.T >= 1, "SgdConfig.T must be >= 1");
      require(sgd.batch_size >= 1, "SgdConfig.batch_size must be >= 1");
      require(sgd_auto_mu || sgd.mu_f > 0.0, "SgdConfig.mu_f must be positive");
    }
    require(threads >= 1, "ProtocolConfig.threads must be >= 1");
  }
};

struct ProtocolOutput {
  std::vector<Vec> per_user_models;
  ClusteringResult server_clustering;
  std::vector<LocalModel> local_models;
  int comm_rounds = 1;
  std::optional<double> eps_hat;  // max_i |sgd_i - exact_i| in diagnostic mode
  std::vector<std::string> warnings;
};

// Per-user mean of the models in its cluster; sums run in increasing user
// index so every caller with the same partition gets identical bits.
inline std::vector<Vec> average_by_assignment(const std::vector<Vec>& models,
                                              const Assignment& a) {
  require(models.size() == a.size(), "average_by_assignment: size mismatch");
  const int K = count_clusters(a);
  std::vector<Vec> sums(static_cast<std::size_t>(K));
  std::vector<int> counts(static_cast<std::size_t>(K), 0);
  for (std::size_t i = 0; i < models.size(); ++i) {
    auto& s = sums[static_cast<std::size_t>(a[i])];
    if (counts[static_cast<std::size_t>(a[i])]++ == 0) {
      s = models[i];
    } else {
      s += models[i];
    }
  }
  for (int k = 0; k < K; ++k) {
    sums[static_cast<std::size_t>(k)] /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
  }
  std::vector<Vec> out;
  out.reserve(models.size());
  for (int c : a) {
    out.push_back(sums[static_cast<std::size_t>(c)]);
  }
  return out;
}

inline std::vector<LocalModel> solve_local_models(const FederatedDataset& data,
                                                  const LossSpec& loss, int threads = 1) {
  std::vector<LocalModel> out(data.shards.size());
  parallel_for(data.shards.size(), threads,
               [&](std::size_t i) { out[i] = solve_erm_exact(loss, data.shards[i]); });
  return out;
}

inline std::vector<LocalModel> solve_local_models_sgd(const FederatedDataset& data,
                                                      const LossSpec& loss,
                                                      const ProtocolConfig& cfg) {
  std::vector<LocalModel> out(data.shards.size());
  parallel_for(data.shards.size(), cfg.threads, [&](std::size_t i) {
    SgdConfig sc = cfg.sgd;
    sc.trace = nullptr;
    if (cfg.sgd_auto_mu) {
      sc.mu_f = strong_convexity(loss, data.shards[i]);
      if (!(sc.mu_f > 0.0)) {
        throw SolverError("user " + std::to_string(i) +
                          ": zero strong-convexity modulus, SGD step rule undefined");
      }
    }
    out[i] = solve_erm_sgd(loss, data.shards[i], sc);
  });
  return out;
}

inline PointSet to_points(const std::vector<LocalModel>& models) {
  require(!models.empty(), "no local models");
  Mat P(static_cast<Index>(models.size()), models.front().params.size());
  PointSet ps;
  for (std::size_t i = 0; i < models.size(); ++i) {
    P.row(static_cast<Index>(i)) = models[i].params.transpose();
    ps.ids.push_back(models[i].user_id);
  }
  ps.points = std::move(P);
  return ps;
}

// Chooses lambda for convex clustering according to the configured rule.
// The interval rules read the true partition (an oracle-informed choice
// used by the synthetic experiments).
inline double pick_lambda(const PointSet& pts, const FederatedDataset& data,
                          const ProtocolConfig& cfg) {
  switch (cfg.lambda_rule) {
    case LambdaRule::kFixed:
      return cfg.lambda;
    case LambdaRule::kTruthBounds:
    case LambdaRule::kSeparability: {
      double lo = 0.0;
      double hi = 0.0;
      if (cfg.lambda_rule == LambdaRule::kSeparability) {
        std::tie(lo, hi) = lambda_interval(pts, data.true_assignment);
      } else {
        const auto rc = verify_recovery(pts, data.true_assignment, 0.0);
        lo = rc.lower;
        hi = rc.upper;
      }
      if (lo < hi) {
        Rng rng(cfg.seed, {Domain::kLambdaPick, 0});
        return rng.uniform(lo, hi);
      }
      return hi;
    }
    case LambdaRule::kClusterpath:
      break;
  }
  return cfg.lambda;
}

inline ClusteringResult run_clustering(const PointSet& pts, const FederatedDataset& data,
                                       const ProtocolConfig& cfg,
                                       std::vector<std::string>* warnings = nullptr) {
  switch (cfg.algo) {
    case ClusterAlgo::kConvex: {
      if (cfg.lambda_rule == LambdaRule::kClusterpath) {
        auto grid = cfg.grid;
        grid.solver = cfg.convex;
        auto cp = clusterpath_select(pts, grid);
        if (warnings) {
          warnings->insert(warnings->end(), cp.warnings.begin(), cp.warnings.end());
        }
        return std::move(cp.clustering);
      }
      const double lam = pick_lambda(pts, data, cfg);
      return convex_cluster(pts, lam, cfg.convex);
    }
    case ClusterAlgo::kSpectral:
      return cfg.partial_spectral ? spectral_kmeans_part1(pts, cfg.K, cfg.seed)
                                  : spectral_kmeans(pts, cfg.K, cfg.seed);
    case ClusterAlgo::kKmeansPP:
      return kmeans_pp(pts, cfg.K, cfg.seed, cfg.restarts);
    case ClusterAlgo::kKmeansEstimated: {
      const int kmax = std::min<int>(cfg.k_max, static_cast<int>(pts.size()));
      const int K = estimate_k(pts, kmax, cfg.metric, cfg.seed, cfg.elbow_threshold);
      auto res = kmeans_pp(pts, K, cfg.seed, cfg.restarts);
      res.diagnostics.algorithm = "kmeans_estimated";
      res.diagnostics.condition_margins["k_estimate"] = K;
      return res;
    }
  }
  throw InvalidArgument("unknown clustering algorithm");
}

inline ProtocolOutput aggregate(std::vector<LocalModel> local, ClusteringResult clustering,
                                int comm_rounds) {
  std::vector<Vec> params;
  params.reserve(local.size());
  for (const auto& lm : local) {
    params.push_back(lm.params);
  }
  ProtocolOutput out;
  out.per_user_models = average_by_assignment(params, clustering.assignment);
  out.server_clustering = std::move(clustering);
  out.local_models = std::move(local);
  out.comm_rounds = comm_rounds;
  return out;
}

inline ProtocolOutput odcl_run(const FederatedDataset& data, const LossSpec& loss,
                               const ProtocolConfig& cfg) {
  cfg.validate();
  loss.validate();
  data.validate();
  std::vector<LocalModel> local;
  std::optional<double> eps_hat;
  if (cfg.erm == ErmMode::kExact) {
    local = solve_local_models(data, loss, cfg.threads);
  } else {
    local = solve_local_models_sgd(data, loss, cfg);
    if (cfg.diagnostic) {
      const auto exact = solve_local_models(data, loss, cfg.threads);
      double e = 0.0;
      for (std::size_t i = 0; i < exact.size(); ++i) {
        e = std::max(e, (local[i].params - exact[i].params).norm());
      }
      eps_hat = e;
    }
  }
  std::vector<std::string> warnings;
  auto clustering = run_clustering(to_points(local), data, cfg, &warnings);
  auto out = aggregate(std::move(local), std::move(clustering), 1);
  out.eps_hat = eps_hat;
  out.warnings = std::move(warnings);
  return out;
}

inline ProtocolOutput odcl_inexact_run(const FederatedDataset& data, const LossSpec& loss,
                                       ProtocolConfig cfg) {
  require(cfg.erm == ErmMode::kSgd, "odcl_inexact_run: erm mode must be sgd");
  return odcl_run(data, loss, cfg);
}

inline ProtocolOutput odcl_partial_spectral_run(const FederatedDataset& data,
                                                const LossSpec& loss, int K,
                                                std::uint64_t seed = 0, int threads = 1) {
  require(K >= 1, "odcl_partial_spectral_run: K must be >= 1");
  ProtocolConfig cfg;
  cfg.algo = ClusterAlgo::kSpectral;
  cfg.partial_spectral = true;
  cfg.K = K;
  cfg.seed = seed;
  cfg.threads = threads;
  return odcl_run(data, loss, cfg);
}

// ---------------------------------------------------------------------------
// Baselines

inline ProtocolOutput baseline_oracle_avg(const FederatedDataset& data, const LossSpec& loss,
                                          int threads = 1) {
  data.validate();
  auto local = solve_local_models(data, loss, threads);
  auto truth = make_result(to_points(local).points, data.true_assignment, "oracle_avg");
  return aggregate(std::move(local), std::move(truth), 1);
}

inline ProtocolOutput baseline_local(const FederatedDataset& data, const LossSpec& loss,
                                     int threads = 1) {
  data.validate();
  auto local = solve_local_models(data, loss, threads);
  Assignment singletons(local.size());
  for (std::size_t i = 0; i < singletons.size(); ++i) {
    singletons[i] = static_cast<int>(i);
  }
  auto res = make_result(to_points(local).points, singletons, "local");
  return aggregate(std::move(local), std::move(res), 0);
}

inline ProtocolOutput baseline_naive(const FederatedDataset& data, const LossSpec& loss,
                                     int threads = 1) {
  data.validate();
  auto local = solve_local_models(data, loss, threads);
  Assignment one(local.size(), 0);
  auto res = make_result(to_points(local).points, one, "naive_avg");
  return aggregate(std::move(local), std::move(res), 1);
}

// ERM on the pooled data of each true cluster.
inline ProtocolOutput baseline_cluster_oracle(const FederatedDataset& data,
                                              const LossSpec& loss, int threads = 1) {
  data.validate();
  const auto groups = members(data.true_assignment);
  std::vector<Vec> cluster_models(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t k) {
    std::vector<const UserShard*> parts;
    for (int i : groups[k]) {
      parts.push_back(&data.shards[static_cast<std::size_t>(i)]);
    }
    cluster_models[k] = solve_erm_exact(loss, pool_shards(parts, static_cast<int>(k))).params;
  });
  ProtocolOutput out;
  Mat P(data.num_users(), cluster_models.front().size());
  for (int i = 0; i < data.num_users(); ++i) {
    const auto& v = cluster_models[static_cast<std::size_t>(data.true_assignment[static_cast<std::size_t>(i)])];
    out.per_user_models.push_back(v);
    P.row(i) = v.transpose();
  }
  out.server_clustering = make_result(P, data.true_assignment, "cluster_oracle");
  out.server_clustering.centroids.resize(static_cast<Index>(cluster_models.size()), P.cols());
  for (std::size_t k = 0; k < cluster_models.size(); ++k) {
    out.server_clustering.centroids.row(static_cast<Index>(k)) = cluster_models[k].transpose();
  }
  out.comm_rounds = 1;
  return out;
}

// ---------------------------------------------------------------------------
// IFCA

enum class IfcaMode { kModelAvg, kGradientAvg };

struct IfcaOptions {
  int local_steps = 10;  // tau, model averaging only
  int batch_size = 1;    // local minibatch size, model averaging only
  std::uint64_t seed = 0;
  int threads = 1;
};

inline int ifca_select(const LossSpec& loss, const std::vector<Vec>& models,
                       const UserShard& shard) {
  int best = 0;
  double bl = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < models.size(); ++k) {
    const double l = eval_loss(loss, models[k], shard);
    if (l < bl) {
      bl = l;
      best = static_cast<int>(k);
    }
  }
  return best;
}

inline ProtocolOutput ifca_run(const FederatedDataset& data, const LossSpec& loss,
                               std::vector<Vec> init, double step, int rounds, IfcaMode mode,
                               const IfcaOptions& opt = {}) {
  data.validate();
  loss.validate();
  require(!init.empty(), "ifca_run: need at least one initial model");
  require(rounds >= 1, "ifca_run: rounds must be >= 1");
  require(step > 0.0 && std::isfinite(step), "ifca_run: step must be positive");
  require(opt.local_steps >= 1 && opt.batch_size >= 1, "ifca_run: invalid local schedule");
  const int p = loss.num_params(data.feature_dim);
  for (const auto& v : init) {
    require(v.size() == p, "ifca_run: initial model has wrong dimension");
  }
  const std::size_t m = data.shards.size();
  const std::size_t K = init.size();
  std::vector<Vec> models = std::move(init);
  Assignment sel(m, 0);
  std::vector<Vec> updates(m);

  for (int r = 0; r < rounds; ++r) {
    parallel_for(m, opt.threads, [&](std::size_t i) {
      const auto& shard = data.shards[i];
      sel[i] = ifca_select(loss, models, shard);
      if (mode == IfcaMode::kGradientAvg) {
        updates[i] = grad(loss, models[static_cast<std::size_t>(sel[i])], shard);
        return;
      }
      Vec th = models[static_cast<std::size_t>(sel[i])];
      Rng rng(opt.seed, {Domain::kIfcaLocal, static_cast<std::uint64_t>(r) * m + i});
      std::vector<Index> batch(static_cast<std::size_t>(opt.batch_size));
      for (int t = 0; t < opt.local_steps; ++t) {
        for (auto& j : batch) {
          j = static_cast<Index>(rng.index(static_cast<std::uint64_t>(shard.size())));
        }
        th -= step * grad(loss, th, shard, batch);
      }
      updates[i] = std::move(th);
    });
    std::vector<Vec> sums(K, Vec::Zero(p));
    std::vector<int> counts(K, 0);
    for (std::size_t i = 0; i < m; ++i) {
      sums[static_cast<std::size_t>(sel[i])] += updates[i];
      ++counts[static_cast<std::size_t>(sel[i])];
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (counts[k] == 0) {
        continue;
      }
      const Vec avg = sums[k] / static_cast<double>(counts[k]);
      models[k] = mode == IfcaMode::kModelAvg ? avg : Vec(models[k] - step * avg);
      if (!models[k].allFinite()) {
        throw SolverError("ifca_run: diverged at round " + std::to_string(r + 1));
      }
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    sel[i] = ifca_select(loss, models, data.shards[i]);
  }
  ProtocolOutput out;
  Mat P(static_cast<Index>(m), p);
  for (std::size_t i = 0; i < m; ++i) {
    out.per_user_models.push_back(models[static_cast<std::size_t>(sel[i])]);
    P.row(static_cast<Index>(i)) = out.per_user_models.back().transpose();
  }
  out.server_clustering = make_result(P, sel, mode == IfcaMode::kModelAvg ? "ifca_model_avg"
                                                                          : "ifca_gradient_avg");
  out.server_clustering.diagnostics.iterations = rounds;
  out.comm_rounds = rounds;
  return out;
}

// Initial models at distance U[D/5, D/3] from each true model in a uniformly
// random direction, D the minimum pairwise distance between true models.
inline std::vector<Vec> ifca_shell_init(const std::vector<Vec>& centers, std::uint64_t seed,
                                        double lo_frac = 0.2, double hi_frac = 1.0 / 3.0) {
  require(centers.size() >= 1, "ifca_shell_init: no centers");
  double D = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centers.size(); ++k) {
    for (std::size_t l = k + 1; l < centers.size(); ++l) {
      D = std::min(D, (centers[k] - centers[l]).norm());
    }
  }
  if (!std::isfinite(D)) {
    D = std::max(1.0, centers.front().norm());
  }
  std::vector<Vec> out;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    Rng rng(seed, {Domain::kIfcaInit, k});
    Vec dir(centers[k].size());
    for (Index j = 0; j < dir.size(); ++j) {
      dir[j] = rng.normal();
    }
    dir.normalize();
    const double r = rng.uniform(lo_frac * D, hi_frac * D);
    out.push_back(centers[k] + r * dir);
  }
  return out;
}

// Initial models with i.i.d. N(0, scale^2) entries.
inline std::vector<Vec> ifca_random_init(int K, int p, double scale, std::uint64_t seed) {
  std::vector<Vec> out;
  for (int k = 0; k < K; ++k) {
    Rng rng(seed, {Domain::kIfcaInit, static_cast<std::uint64_t>(1000 + k)});
    Vec v(p);
    for (int j = 0; j < p; ++j) {
      v[j] = scale * rng.normal();
    }
    out.push_back(std::move(v));
  }
  return out;
}

// JSON manifest plus a per-user model table.
inline void export_output(const ProtocolOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["comm_rounds"] = out.comm_rounds;
  j["num_users"] = out.per_user_models.size();
  j["clustering"] = to_json(out.server_clustering);
  j["eps_hat"] = out.eps_hat ? nlohmann::json(*out.eps_hat) : nlohmann::json();
  j["warnings"] = out.warnings;
  j["models"] = "models.csv";
  std::ofstream(dir / "manifest.json") << j.dump(2) << '\n';
  std::ofstream table(dir / "models.csv");
  for (std::size_t i = 0; i < out.per_user_models.size(); ++i) {
    const auto& v = out.per_user_models[i];
    std::vector<double> row{static_cast<double>(i)};
    row.insert(row.end(), v.data(), v.data() + v.size());
    csv::write_row(table, row);
  }
}

}  // namespace odcl
