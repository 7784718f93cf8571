#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace odcl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// Cluster index per point; labels are 0-based and dense in [0, K).
using Assignment = std::vector<int>;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure: non-convergence, non-finite data.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed external input (files, configs).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) {
    throw InvalidArgument(what);
  }
}

inline int count_clusters(const Assignment& a) {
  int k = 0;
  for (int c : a) {
    k = std::max(k, c + 1);
  }
  return k;
}

// Members of each cluster, in increasing point order.
inline std::vector<std::vector<int>> members(const Assignment& a) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(count_clusters(a)));
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[static_cast<std::size_t>(a[i])].push_back(static_cast<int>(i));
  }
  return out;
}

// Relabels clusters in order of first appearance and drops empty labels.
inline Assignment canonical(const Assignment& a) {
  std::vector<int> map(static_cast<std::size_t>(count_clusters(a)), -1);
  Assignment out(a.size());
  int next = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    int& m = map[static_cast<std::size_t>(a[i])];
    if (m < 0) {
      m = next++;
    }
    out[i] = m;
  }
  return out;
}

inline bool same_partition(const Assignment& a, const Assignment& b) {
  return a.size() == b.size() && canonical(a) == canonical(b);
}

}  // namespace odcl
