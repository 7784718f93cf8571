#pragma once

// Local losses and solvers. Parameters are a flat vector: d weights followed
// by the intercept when LossSpec::has_intercept is set.

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "odcl/data.hpp"
#include "odcl/rng.hpp"
#include "odcl/types.hpp"

namespace odcl {

enum class LossKind { kQuadratic, kLogistic };

inline const char* to_string(LossKind k) {
  return k == LossKind::kQuadratic ? "quadratic" : "logistic";
}

struct LossSpec {
  LossKind kind = LossKind::kQuadratic;
  double reg = 0.0;
  bool has_intercept = false;
  double radius_R = 1e6;

  void validate() const {
    require(reg >= 0.0 && std::isfinite(reg), "LossSpec.reg must be nonnegative");
    require(radius_R > 0.0, "LossSpec.radius_R must be positive");
  }

  int num_params(int d) const { return d + (has_intercept ? 1 : 0); }
};

struct SolveMeta {
  int iterations = 0;
  double final_objective = 0.0;
  std::string method;
};

struct LocalModel {
  Vec params;
  int user_id = 0;
  SolveMeta meta;
};

struct SgdConfig {
  int T = 1000;
  double mu_f = 1.0;
  int batch_size = 1;
  std::uint64_t seed = 0;
  std::ostream* trace = nullptr;  // optional CSV: t,step,param_norm

  void validate() const {
    require(T >= 1, "SgdConfig.T must be >= 1");
    require(mu_f > 0.0 && std::isfinite(mu_f), "SgdConfig.mu_f must be positive");
    require(batch_size >= 1, "SgdConfig.batch_size must be >= 1");
  }
};

// Euclidean projection onto the closed ball of radius R.
inline Vec project_ball(const Vec& v, double R) {
  require(R > 0.0, "project_ball: R must be positive");
  const double nv = v.norm();
  if (nv <= R) {
    return v;
  }
  return v * (R / nv);
}

namespace detail {

inline void check_dims(const LossSpec& loss, const Vec& params, const UserShard& shard) {
  require(params.size() == loss.num_params(static_cast<int>(shard.features.cols())),
          "parameter dimension " + std::to_string(params.size()) +
              " does not match shard feature_dim " +
              std::to_string(shard.features.cols()));
}

inline double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

// Margin-free linear prediction <x, w> + b for row j.
inline double predict_row(const LossSpec& loss, const Vec& params, const UserShard& s,
                          Index j) {
  const Index d = s.features.cols();
  double z = s.features.row(j).dot(params.head(d));
  if (loss.has_intercept) {
    z += params[d];
  }
  return z;
}

// Weights-only ball projection; the intercept is left untouched.
inline void project_weights(const LossSpec& loss, Vec& params, Index d) {
  if (loss.has_intercept) {
    params.head(d) = project_ball(params.head(d), loss.radius_R);
  } else {
    params = project_ball(params, loss.radius_R);
  }
}

inline Mat design(const LossSpec& loss, const Mat& X) {
  if (!loss.has_intercept) {
    return X;
  }
  Mat Z(X.rows(), X.cols() + 1);
  Z.leftCols(X.cols()) = X;
  Z.col(X.cols()).setOnes();
  return Z;
}

inline Vec reg_diag(const LossSpec& loss, Index d) {
  Vec r = Vec::Constant(loss.num_params(static_cast<int>(d)), loss.reg);
  if (loss.has_intercept) {
    r[d] = 0.0;
  }
  return r;
}

}  // namespace detail

// Per-sample loss on row j, without the regularizer.
inline double sample_loss(const LossSpec& loss, const Vec& params, const UserShard& s, Index j) {
  const double z = detail::predict_row(loss, params, s, j);
  if (loss.kind == LossKind::kQuadratic) {
    const double r = s.labels[j] - z;
    return 0.5 * r * r;
  }
  return detail::softplus(-s.labels[j] * z);
}

inline double regularizer(const LossSpec& loss, const Vec& params, Index d) {
  return 0.5 * loss.reg * params.head(d).squaredNorm();
}

inline double eval_loss(const LossSpec& loss, const Vec& params, const UserShard& shard) {
  detail::check_dims(loss, params, shard);
  require(shard.size() > 0, "eval_loss: empty shard");
  double sum = 0.0;
  for (Index j = 0; j < shard.size(); ++j) {
    sum += sample_loss(loss, params, shard, j);
  }
  return sum / static_cast<double>(shard.size()) +
         regularizer(loss, params, shard.features.cols());
}

inline double eval_loss(const LossSpec& loss, const LocalModel& model, const UserShard& shard) {
  return eval_loss(loss, model.params, shard);
}

// Gradient of the mean loss over `batch` (row indices, repeats allowed)
// plus the regularizer.
inline Vec grad(const LossSpec& loss, const Vec& params, const UserShard& shard,
                std::span<const Index> batch) {
  detail::check_dims(loss, params, shard);
  require(!batch.empty(), "grad: empty batch");
  const Index d = shard.features.cols();
  Vec g = Vec::Zero(params.size());
  for (Index j : batch) {
    require(j >= 0 && j < shard.size(), "grad: batch index out of range");
    const double z = detail::predict_row(loss, params, shard, j);
    double coef;
    if (loss.kind == LossKind::kQuadratic) {
      coef = z - shard.labels[j];
    } else {
      const double y = shard.labels[j];
      coef = -y * sigmoid(-y * z);
    }
    g.head(d) += coef * shard.features.row(j).transpose();
    if (loss.has_intercept) {
      g[d] += coef;
    }
  }
  g /= static_cast<double>(batch.size());
  g.head(d) += loss.reg * params.head(d);
  return g;
}

// Full-shard gradient.
inline Vec grad(const LossSpec& loss, const Vec& params, const UserShard& shard) {
  detail::check_dims(loss, params, shard);
  require(shard.size() > 0, "grad: empty batch");
  const Index d = shard.features.cols();
  Vec coef(shard.size());
  for (Index j = 0; j < shard.size(); ++j) {
    const double z = detail::predict_row(loss, params, shard, j);
    if (loss.kind == LossKind::kQuadratic) {
      coef[j] = z - shard.labels[j];
    } else {
      const double y = shard.labels[j];
      coef[j] = -y * sigmoid(-y * z);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(shard.size());
  Vec g(params.size());
  g.head(d) = inv_n * (shard.features.transpose() * coef) + loss.reg * params.head(d);
  if (loss.has_intercept) {
    g[d] = inv_n * coef.sum();
  }
  return g;
}

// Strong-convexity modulus used by the SGD step rule: smallest eigenvalue of
// the empirical second-moment matrix plus reg (quadratic), or reg (logistic).
inline double strong_convexity(const LossSpec& loss, const UserShard& shard) {
  if (loss.kind == LossKind::kLogistic) {
    return loss.reg;
  }
  const Mat Z = detail::design(loss, shard.features);
  const Mat M = Z.transpose() * Z / static_cast<double>(shard.size());
  Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().minCoeff()) + loss.reg;
}

namespace detail {

inline void require_finite(const UserShard& shard) {
  if (!shard.features.allFinite() || !shard.labels.allFinite()) {
    throw SolverError("non-finite data in shard of user " + std::to_string(shard.user_id));
  }
}

inline LocalModel solve_quadratic(const LossSpec& loss, const UserShard& shard) {
  const Index d = shard.features.cols();
  const Mat Z = design(loss, shard.features);
  const double inv_n = 1.0 / static_cast<double>(shard.size());
  Mat H = inv_n * (Z.transpose() * Z);
  H.diagonal() += reg_diag(loss, d);
  const Vec rhs = inv_n * (Z.transpose() * shard.labels);
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(H);
  LocalModel out;
  out.params = cod.solve(rhs);
  out.meta.method = "normal_equations";
  out.meta.iterations = 1;
  return out;
}

inline LocalModel solve_logistic(const LossSpec& loss, const UserShard& shard) {
  const Index d = shard.features.cols();
  const Index p = loss.num_params(static_cast<int>(d));
  const Mat Z = design(loss, shard.features);
  const Vec R = reg_diag(loss, d);
  const double inv_n = 1.0 / static_cast<double>(shard.size());
  const auto& y = shard.labels;

  auto objective = [&](const Vec& th) {
    const Vec z = Z * th;
    double s = 0.0;
    for (Index j = 0; j < z.size(); ++j) {
      s += softplus(-y[j] * z[j]);
    }
    return s * inv_n + 0.5 * loss.reg * th.head(d).squaredNorm();
  };

  Vec th = Vec::Zero(p);
  double f = objective(th);
  constexpr int kMaxIter = 200;
  constexpr double kTol = 1e-8;
  LocalModel out;
  out.meta.method = "newton";
  for (int it = 0; it < kMaxIter; ++it) {
    const Vec z = Z * th;
    Vec coef(z.size()), w(z.size());
    for (Index j = 0; j < z.size(); ++j) {
      coef[j] = -y[j] * sigmoid(-y[j] * z[j]);
      const double s = sigmoid(z[j]);
      w[j] = s * (1.0 - s);
    }
    Vec g = inv_n * (Z.transpose() * coef) + R.cwiseProduct(th);
    out.meta.iterations = it;
    if (g.norm() <= kTol) {
      out.params = th;
      out.meta.final_objective = f;
      return out;
    }
    Mat H = inv_n * (Z.transpose() * w.asDiagonal() * Z);
    H.diagonal() += R;
    // tiny ridge keeps the system solvable when the curvature vanishes
    H.diagonal().array() += 1e-12 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
    Eigen::LDLT<Mat> ldlt(H);
    Vec step = -ldlt.solve(g);
    if (!step.allFinite() || step.dot(g) >= 0.0) {
      step = -g;
    }
    if (-g.dot(step) <= 1e-15 * (1.0 + std::abs(f)) && g.norm() <= 1e-5) {
      // Newton decrement below double resolution of the objective
      out.params = th;
      out.meta.final_objective = f;
      return out;
    }
    double t = 1.0;
    double f_new = objective(th + step);
    while (f_new > f + 1e-4 * t * g.dot(step) && t > 1e-12) {
      t *= 0.5;
      f_new = objective(th + t * step);
    }
    if (!(f_new <= f)) {
      // no further decrease is representable
      out.params = th;
      out.meta.final_objective = f;
      out.meta.iterations = it;
      if (g.norm() <= 1e-6) {
        return out;
      }
      break;
    }
    th += t * step;
    f = f_new;
    if (th.head(d).norm() > 1e3 * loss.radius_R) {
      break;
    }
  }
  if (th.head(d).norm() > loss.radius_R) {
    // diverging (e.g. separable data without regularization): the ball binds
    out.params = th;
    out.meta.method = "newton+projection";
    out.meta.final_objective = f;
    return out;
  }
  throw SolverError("logistic ERM did not converge for user " + std::to_string(shard.user_id) +
                    " (gradient norm " +
                    std::to_string(grad(loss, th, shard).norm()) + ")");
}

}  // namespace detail

inline LocalModel solve_erm_exact(const LossSpec& loss, const UserShard& shard) {
  loss.validate();
  require(shard.size() > 0, "solve_erm_exact: empty shard");
  detail::require_finite(shard);
  LocalModel out = loss.kind == LossKind::kQuadratic ? detail::solve_quadratic(loss, shard)
                                                     : detail::solve_logistic(loss, shard);
  const Index d = shard.features.cols();
  detail::project_weights(loss, out.params, d);
  out.user_id = shard.user_id;
  out.meta.final_objective = eval_loss(loss, out.params, shard);
  return out;
}

// T projected-SGD steps from zero with step 1/(mu_f t); last iterate.
inline LocalModel solve_erm_sgd(const LossSpec& loss, const UserShard& shard,
                                const SgdConfig& cfg) {
  loss.validate();
  cfg.validate();
  require(shard.size() > 0, "solve_erm_sgd: empty shard");
  detail::require_finite(shard);
  const Index d = shard.features.cols();
  const Index p = loss.num_params(static_cast<int>(d));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X = shard.features;
  const Vec& y = shard.labels;
  Vec th = Vec::Zero(p);
  Vec g(p);
  Rng rng(cfg.seed, {Domain::kSgd, static_cast<std::uint64_t>(shard.user_id)});
  const auto n = static_cast<std::uint64_t>(shard.size());
  const double inv_b = 1.0 / cfg.batch_size;
  const Index wdim = loss.has_intercept ? d : p;
  if (cfg.trace) {
    *cfg.trace << "t,step,param_norm\n";
  }
  for (int t = 1; t <= cfg.T; ++t) {
    g.setZero();
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto j = static_cast<Index>(rng.index(n));
      double z = X.row(j).dot(th.head(d));
      if (loss.has_intercept) {
        z += th[d];
      }
      const double coef =
          loss.kind == LossKind::kQuadratic ? z - y[j] : -y[j] * sigmoid(-y[j] * z);
      g.head(d) += coef * X.row(j).transpose();
      if (loss.has_intercept) {
        g[d] += coef;
      }
    }
    g *= inv_b;
    g.head(d) += loss.reg * th.head(d);
    const double eta = 1.0 / (cfg.mu_f * t);
    th -= eta * g;
    const double wn = th.head(wdim).norm();
    if (wn > loss.radius_R) {
      th.head(wdim) *= loss.radius_R / wn;
    }
    if (cfg.trace) {
      *cfg.trace << t << ',' << csv::format(eta) << ',' << csv::format(th.norm()) << '\n';
    }
  }
  LocalModel out;
  out.params = std::move(th);
  out.user_id = shard.user_id;
  out.meta.iterations = cfg.T;
  out.meta.method = "sgd";
  out.meta.final_objective = eval_loss(loss, out.params, shard);
  return out;
}

struct GammaEstimate {
  double sigma = 0.0;  // max single-sample deviation from the full gradient
  double G = 0.0;      // max full-gradient norm
  double gamma() const { return sigma + G; }
};

// Brute-force sup of gradient quantities over `samples` points of the
// parameter ball (half in the interior, half on the boundary). The intercept,
// when present, is sampled in [-R, R].
inline GammaEstimate estimate_gamma(const LossSpec& loss, const UserShard& shard, int samples,
                                    std::uint64_t seed) {
  require(samples >= 1, "estimate_gamma: need at least one sample");
  const Index d = shard.features.cols();
  Rng rng(seed, {Domain::kMisc, 1});
  GammaEstimate est;
  Vec th(loss.num_params(static_cast<int>(d)));
  std::vector<Index> one(1);
  for (int s = 0; s < samples; ++s) {
    Vec dir(d);
    for (Index j = 0; j < d; ++j) {
      dir[j] = rng.normal();
    }
    dir.normalize();
    const double r = s % 2 == 0
                         ? loss.radius_R
                         : loss.radius_R * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    th.head(d) = r * dir;
    if (loss.has_intercept) {
      th[d] = rng.uniform(-loss.radius_R, loss.radius_R);
    }
    const Vec g = grad(loss, th, shard);
    est.G = std::max(est.G, g.norm());
    for (Index j = 0; j < shard.size(); ++j) {
      one[0] = j;
      est.sigma = std::max(est.sigma, (grad(loss, th, shard, one) - g).norm());
    }
  }
  return est;
}

// Concatenation of several shards (used for pooled cluster solves).
inline UserShard pool_shards(const std::vector<const UserShard*>& parts, int id) {
  require(!parts.empty(), "pool_shards: nothing to pool");
  Index rows = 0;
  for (const auto* p : parts) {
    rows += p->size();
  }
  const Index d = parts.front()->features.cols();
  UserShard out{Mat(rows, d), Vec(rows), id, parts.front()->cluster_id};
  Index at = 0;
  for (const auto* p : parts) {
    out.features.middleRows(at, p->size()) = p->features;
    out.labels.segment(at, p->size()) = p->labels;
    at += p->size();
  }
  return out;
}

}  // namespace odcl
