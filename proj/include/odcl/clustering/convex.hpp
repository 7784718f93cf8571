#pragma once

// Convex clustering (sum-of-squares fusion with unit pairwise weights)
// solved by ADMM over the pairwise difference variables.

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "odcl/clustering/common.hpp"

namespace odcl {

struct ConvexOptions {
  double tol = 1e-6;
  int max_iter = 50000;
  double fusion_rel = 1e-4;  // fusion threshold relative to the data diameter
};

// Unweighted convex clustering objective.
inline double convex_objective(const Mat& A, const Mat& U, double lambda) {
  double fused = 0.0;
  for (Index i = 0; i < U.rows(); ++i) {
    for (Index j = i + 1; j < U.rows(); ++j) {
      fused += (U.row(i) - U.row(j)).norm();
    }
  }
  return 0.5 * (A - U).squaredNorm() + lambda * fused;
}

// Connected components of the graph {i ~ j : |u_i - u_j| <= threshold}.
inline Assignment fuse(const Mat& U, double threshold) {
  const Index m = U.rows();
  std::vector<int> parent(static_cast<std::size_t>(m));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      x = parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    }
    return x;
  };
  const double t2 = threshold * threshold;
  for (Index i = 0; i < m; ++i) {
    for (Index j = i + 1; j < m; ++j) {
      if ((U.row(i) - U.row(j)).squaredNorm() <= t2) {
        const int a = find(static_cast<int>(i));
        const int b = find(static_cast<int>(j));
        if (a != b) {
          parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
        }
      }
    }
  }
  Assignment out(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    out[static_cast<std::size_t>(i)] = find(static_cast<int>(i));
  }
  return canonical(out);
}

struct ConvexSolution {
  Mat U;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ADMM on  min 1/2 |A - U|^2 + lambda sum_p |v_p|  s.t.  v_p = u_i - u_j,
// in scaled form with residual-balancing penalty updates.
inline ConvexSolution convex_admm(const Mat& A, double lambda, const ConvexOptions& opt) {
  const Index m = A.rows();
  const Index d = A.cols();
  ConvexSolution sol;
  if (m == 1) {
    sol.U = A;
    return sol;
  }
  const Index P = m * (m - 1) / 2;
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(P));
  for (Index i = 0; i < m; ++i) {
    for (Index j = i + 1; j < m; ++j) {
      pairs.emplace_back(i, j);
    }
  }
  const RowMat Ar = A;
  RowMat U = Ar;
  RowMat V(P, d), W = RowMat::Zero(P, d), DU(P, d), Vold(P, d), B(m, d), T(m, d);
  auto apply_D = [&](const RowMat& X, RowMat& out) {
    for (Index p = 0; p < P; ++p) {
      out.row(p) = X.row(pairs[static_cast<std::size_t>(p)].first) -
                   X.row(pairs[static_cast<std::size_t>(p)].second);
    }
  };
  auto apply_Dt = [&](const RowMat& Y, RowMat& out) {
    out.setZero();
    for (Index p = 0; p < P; ++p) {
      out.row(pairs[static_cast<std::size_t>(p)].first) += Y.row(p);
      out.row(pairs[static_cast<std::size_t>(p)].second) -= Y.row(p);
    }
  };
  apply_D(U, DU);
  V = DU;
  double rho = 1.0 / static_cast<double>(m);
  const double scale = 1.0 + Ar.norm();

  for (int it = 1; it <= opt.max_iter; ++it) {
    // U-update: (I + rho D^T D) U = A + rho D^T (V - W), with D^T D = m I - 1 1^T
    apply_Dt(V - W, T);
    B = Ar + rho * T;
    const Eigen::RowVectorXd mean = B.colwise().mean();
    U = (B.rowwise() - mean) / (1.0 + rho * static_cast<double>(m));
    U.rowwise() += mean;

    // V-update: group soft-thresholding of DU + W
    apply_D(U, DU);
    Vold.swap(V);
    const double thr = lambda / rho;
    for (Index p = 0; p < P; ++p) {
      const Eigen::RowVectorXd z = DU.row(p) + W.row(p);
      const double nz = z.norm();
      if (nz <= thr) {
        V.row(p).setZero();
      } else {
        V.row(p) = (1.0 - thr / nz) * z;
      }
    }
    W += DU - V;

    const double r = (DU - V).norm();
    apply_Dt(V - Vold, T);
    const double s = rho * T.norm();
    sol.iterations = it;
    sol.primal_residual = r;
    sol.dual_residual = s;
    const double eps_pri = opt.tol * (scale + std::max(DU.norm(), V.norm()));
    apply_Dt(W, T);
    const double eps_dual = opt.tol * (scale + rho * T.norm());
    if (r <= eps_pri && s <= eps_dual) {
      sol.U = U;
      return sol;
    }
    if (r > 10.0 * s) {
      rho *= 2.0;
      W *= 0.5;
    } else if (s > 10.0 * r) {
      rho *= 0.5;
      W *= 2.0;
    }
  }
  std::ostringstream msg;
  msg << "convex clustering did not converge in " << opt.max_iter
      << " iterations (lambda " << lambda << ", primal residual " << sol.primal_residual
      << ", dual residual " << sol.dual_residual << ")";
  throw SolverError(msg.str());
}

}  // namespace detail

inline ConvexSolution convex_solve(const Mat& A, double lambda, const ConvexOptions& opt = {}) {
  require(lambda > 0.0 && std::isfinite(lambda), "convex_cluster: lambda must be positive");
  require(opt.tol > 0.0, "convex_cluster: tol must be positive");
  return detail::convex_admm(A, lambda, opt);
}

inline ClusteringResult convex_cluster(const PointSet& pts, double lambda,
                                       const ConvexOptions& opt = {}) {
  pts.validate();
  auto sol = convex_solve(pts.points, lambda, opt);
  const double threshold = opt.fusion_rel * diameter(pts.points);
  auto res = make_result(pts.points, fuse(sol.U, threshold), "convex_cc");
  res.diagnostics.iterations = sol.iterations;
  res.diagnostics.objective = convex_objective(pts.points, sol.U, lambda);
  res.diagnostics.lambda = lambda;
  res.diagnostics.condition_margins["primal_residual"] = sol.primal_residual;
  res.diagnostics.condition_margins["dual_residual"] = sol.dual_residual;
  return res;
}

}  // namespace odcl
