#pragma once

// Config-driven sweeps over (n, seed, method) with CSV reports and a JSON
// summary. See docs/config.md for the schema.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "odcl/eval.hpp"
#include "odcl/protocol.hpp"

namespace odcl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LinearSource {
  int K = 10;
  int m = 100;
  int d = 20;
  std::vector<Interval> intervals = ten_cluster_intervals();
  int sparsity = 5;
  double noise_std = 1.0;
  int test_size = 0;
};

struct LogisticSource {
  int m = 100;
  int test_size = 1000;
};

// Label-flip task on a synthetic two-class pool or an ingested table.
struct LabelFlipSource {
  int m = 100;
  int d = 40;
  int per_class = 2500;
  double mean_shift = 2.054;
  std::optional<std::filesystem::path> table;
  TableSchema schema;
};

using DataSource = std::variant<LinearSource, LogisticSource, LabelFlipSource>;

enum class MethodType { kOdcl, kOracleAvg, kLocal, kNaive, kClusterOracle, kIfca };

enum class IfcaInit { kShell, kRandom, kOracleNoise };

struct MethodSpec {
  std::string name;
  MethodType type = MethodType::kOdcl;
  ProtocolConfig protocol;
  // IFCA
  IfcaMode ifca_mode = IfcaMode::kGradientAvg;
  IfcaInit ifca_init = IfcaInit::kShell;
  double init_scale = 1.0;
  double step = 0.1;
  int rounds = 200;
  int ifca_K = 0;  // 0: number of true clusters
  IfcaOptions ifca;
};

struct ExperimentConfig {
  DataSource data;
  LossSpec loss;
  std::vector<MethodSpec> methods;
  std::vector<int> sweep;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "out";
  int threads = 1;
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) {
      throw ConfigError(where + ": unknown key '" + k + "'");
    }
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  if (!j.contains(key)) {
    return fallback;
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename T>
T pick(const json& j, const std::string& key, const std::map<std::string, T>& choices, T fallback,
       const std::string& where) {
  if (!j.contains(key)) {
    return fallback;
  }
  const auto s = get_or<std::string>(j, key, "", where);
  const auto it = choices.find(s);
  if (it == choices.end()) {
    throw ConfigError(where + "." + key + ": unknown value '" + s + "'");
  }
  return it->second;
}

inline std::vector<Interval> parse_intervals(const json& j, const std::string& where) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "ten_cluster") {
      return ten_cluster_intervals();
    }
    if (s == "four_cluster") {
      return four_cluster_intervals();
    }
    throw ConfigError(where + ": unknown interval preset '" + s + "'");
  }
  if (!j.is_array()) {
    throw ConfigError(where + ": expected a preset name or a list of [lo, hi]");
  }
  std::vector<Interval> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
      throw ConfigError(where + ": each interval must be [lo, hi]");
    }
    out.push_back({e[0].get<double>(), e[1].get<double>()});
  }
  return out;
}

inline DataSource parse_data(const json& j) {
  const std::string w = "data";
  if (!j.is_object() || !j.contains("kind")) {
    throw ConfigError("data.kind: required");
  }
  const auto kind = get_or<std::string>(j, "kind", "", w);
  if (kind == "linear") {
    check_keys(j, {"kind", "K", "m", "d", "intervals", "sparsity", "noise_std", "test_size"}, w);
    LinearSource s;
    s.K = get_or(j, "K", s.K, w);
    s.m = get_or(j, "m", s.m, w);
    s.d = get_or(j, "d", s.d, w);
    if (j.contains("intervals")) {
      s.intervals = parse_intervals(j["intervals"], "data.intervals");
    }
    s.sparsity = get_or(j, "sparsity", s.sparsity, w);
    s.noise_std = get_or(j, "noise_std", s.noise_std, w);
    s.test_size = get_or(j, "test_size", s.test_size, w);
    if (static_cast<int>(s.intervals.size()) != s.K) {
      throw ConfigError("data.intervals: need one interval per cluster");
    }
    return s;
  }
  if (kind == "logistic") {
    check_keys(j, {"kind", "m", "test_size"}, w);
    LogisticSource s;
    s.m = get_or(j, "m", s.m, w);
    s.test_size = get_or(j, "test_size", s.test_size, w);
    return s;
  }
  if (kind == "label_flip") {
    check_keys(j, {"kind", "m", "d", "per_class", "mean_shift", "table", "header", "delimiter"}, w);
    LabelFlipSource s;
    s.m = get_or(j, "m", s.m, w);
    s.d = get_or(j, "d", s.d, w);
    s.per_class = get_or(j, "per_class", s.per_class, w);
    s.mean_shift = get_or(j, "mean_shift", s.mean_shift, w);
    if (j.contains("table")) {
      s.table = get_or<std::string>(j, "table", "", w);
    }
    s.schema.header = pick<HeaderMode>(
        j, "header",
        {{"auto", HeaderMode::kAuto}, {"present", HeaderMode::kPresent}, {"none", HeaderMode::kNone}},
        HeaderMode::kAuto, w);
    const auto delim = get_or<std::string>(j, "delimiter", ",", w);
    if (delim.size() != 1) {
      throw ConfigError("data.delimiter: must be a single character");
    }
    s.schema.delimiter = delim[0];
    return s;
  }
  throw ConfigError("data.kind: unknown value '" + kind + "'");
}

inline LossSpec parse_loss(const json& j) {
  const std::string w = "loss";
  check_keys(j, {"kind", "reg", "intercept", "radius"}, w);
  LossSpec l;
  l.kind = pick<LossKind>(j, "kind",
                          {{"quadratic", LossKind::kQuadratic}, {"logistic", LossKind::kLogistic}},
                          LossKind::kQuadratic, w);
  l.reg = get_or(j, "reg", 0.0, w);
  l.has_intercept = get_or(j, "intercept", false, w);
  l.radius_R = get_or(j, "radius", l.radius_R, w);
  try {
    l.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return l;
}

inline MethodSpec parse_method(const json& j, std::size_t idx) {
  const std::string w = "methods[" + std::to_string(idx) + "]";
  if (!j.is_object() || !j.contains("type")) {
    throw ConfigError(w + ".type: required");
  }
  MethodSpec ms;
  ms.type = pick<MethodType>(j, "type",
                             {{"odcl", MethodType::kOdcl},
                              {"oracle_avg", MethodType::kOracleAvg},
                              {"local", MethodType::kLocal},
                              {"naive", MethodType::kNaive},
                              {"cluster_oracle", MethodType::kClusterOracle},
                              {"ifca", MethodType::kIfca}},
                             MethodType::kOdcl, w);
  ms.name = get_or<std::string>(j, "name", j["type"].get<std::string>(), w);
  if (ms.name.empty() || ms.name.find_first_of(",\n\"") != std::string::npos) {
    throw ConfigError(w + ".name: must be nonempty without commas or quotes");
  }
  switch (ms.type) {
    case MethodType::kOdcl: {
      check_keys(j,
                 {"type", "name", "algo", "K", "lambda_rule", "lambda", "restarts", "metric",
                  "k_max", "elbow_threshold", "erm", "sgd_T", "sgd_batch", "sgd_mu",
                  "partial_spectral", "diagnostic", "grid_points", "tol"},
                 w);
      auto& p = ms.protocol;
      p.algo = pick<ClusterAlgo>(j, "algo",
                                 {{"convex", ClusterAlgo::kConvex},
                                  {"spectral", ClusterAlgo::kSpectral},
                                  {"kmeans_pp", ClusterAlgo::kKmeansPP},
                                  {"kmeans_estimated", ClusterAlgo::kKmeansEstimated}},
                                 ClusterAlgo::kKmeansPP, w);
      p.K = get_or(j, "K", p.K, w);
      p.lambda_rule = pick<LambdaRule>(j, "lambda_rule",
                                       {{"fixed", LambdaRule::kFixed},
                                        {"truth_bounds", LambdaRule::kTruthBounds},
                                        {"separability", LambdaRule::kSeparability},
                                        {"clusterpath", LambdaRule::kClusterpath}},
                                       LambdaRule::kFixed, w);
      p.lambda = get_or(j, "lambda", p.lambda, w);
      p.restarts = get_or(j, "restarts", p.restarts, w);
      p.metric = pick<KMetric>(j, "metric",
                               {{"silhouette", KMetric::kSilhouette}, {"elbow", KMetric::kElbow}},
                               KMetric::kSilhouette, w);
      p.k_max = get_or(j, "k_max", p.k_max, w);
      p.elbow_threshold = get_or(j, "elbow_threshold", p.elbow_threshold, w);
      p.erm = pick<ErmMode>(j, "erm", {{"exact", ErmMode::kExact}, {"sgd", ErmMode::kSgd}},
                            ErmMode::kExact, w);
      p.sgd.T = get_or(j, "sgd_T", p.sgd.T, w);
      p.sgd.batch_size = get_or(j, "sgd_batch", p.sgd.batch_size, w);
      if (j.contains("sgd_mu")) {
        p.sgd.mu_f = get_or(j, "sgd_mu", 1.0, w);
        p.sgd_auto_mu = false;
      }
      p.partial_spectral = get_or(j, "partial_spectral", false, w);
      p.diagnostic = get_or(j, "diagnostic", false, w);
      p.grid.points = get_or(j, "grid_points", p.grid.points, w);
      p.convex.tol = get_or(j, "tol", p.convex.tol, w);
      try {
        p.validate();
      } catch (const InvalidArgument& e) {
        throw ConfigError(w + ": " + e.what());
      }
      break;
    }
    case MethodType::kIfca: {
      check_keys(j,
                 {"type", "name", "mode", "init", "init_scale", "step", "rounds", "K",
                  "local_steps", "batch_size"},
                 w);
      ms.ifca_mode = pick<IfcaMode>(
          j, "mode", {{"model_avg", IfcaMode::kModelAvg}, {"gradient_avg", IfcaMode::kGradientAvg}},
          IfcaMode::kGradientAvg, w);
      ms.ifca_init = pick<IfcaInit>(j, "init",
                                    {{"shell", IfcaInit::kShell},
                                     {"random", IfcaInit::kRandom},
                                     {"oracle_noise", IfcaInit::kOracleNoise}},
                                    IfcaInit::kShell, w);
      ms.init_scale = get_or(j, "init_scale", ms.init_scale, w);
      ms.step = get_or(j, "step", ms.step, w);
      ms.rounds = get_or(j, "rounds", ms.rounds, w);
      ms.ifca_K = get_or(j, "K", 0, w);
      ms.ifca.local_steps = get_or(j, "local_steps", ms.ifca.local_steps, w);
      ms.ifca.batch_size = get_or(j, "batch_size", ms.ifca.batch_size, w);
      if (!(ms.step > 0.0) || ms.rounds < 1 || ms.ifca_K < 0 || ms.ifca.local_steps < 1 ||
          ms.ifca.batch_size < 1 || !(ms.init_scale >= 0.0)) {
        throw ConfigError(w + ": invalid IFCA schedule");
      }
      break;
    }
    default:
      check_keys(j, {"type", "name"}, w);
  }
  return ms;
}

}  // namespace detail

inline ExperimentConfig parse_experiment(const nlohmann::json& j) {
  using detail::check_keys;
  check_keys(j, {"data", "loss", "methods", "sweep", "seeds", "output_dir", "threads"}, "config");
  for (const char* key : {"data", "methods", "sweep", "seeds"}) {
    if (!j.contains(key)) {
      throw ConfigError(std::string(key) + ": required");
    }
  }
  ExperimentConfig cfg;
  cfg.data = detail::parse_data(j["data"]);
  cfg.loss = j.contains("loss") ? detail::parse_loss(j["loss"]) : LossSpec{};
  if (!j["methods"].is_array() || j["methods"].empty()) {
    throw ConfigError("methods: need at least one method");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < j["methods"].size(); ++i) {
    cfg.methods.push_back(detail::parse_method(j["methods"][i], i));
    if (!names.insert(cfg.methods.back().name).second) {
      throw ConfigError("methods[" + std::to_string(i) + "].name: duplicate '" +
                        cfg.methods.back().name + "'");
    }
  }
  if (!j["sweep"].is_array() || j["sweep"].empty()) {
    throw ConfigError("sweep: need at least one n value");
  }
  for (const auto& v : j["sweep"]) {
    if (!v.is_number_integer() || v.get<long long>() <= 0) {
      throw ConfigError("sweep: values must be positive integers");
    }
    cfg.sweep.push_back(v.get<int>());
  }
  if (!j["seeds"].is_array() || j["seeds"].empty()) {
    throw ConfigError("seeds: need at least one seed");
  }
  for (const auto& v : j["seeds"]) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError("seeds: values must be nonnegative integers");
    }
    cfg.seeds.push_back(v.get<std::uint64_t>());
  }
  cfg.output_dir = detail::get_or<std::string>(j, "output_dir", "out", "config");
  cfg.threads = detail::get_or(j, "threads", 1, "config");
  if (cfg.threads < 1) {
    throw ConfigError("threads: must be >= 1");
  }
  return cfg;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config '" + path.string() + "'");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_experiment(j);
}

inline FederatedDataset make_dataset(const DataSource& src, int n, std::uint64_t seed) {
  if (const auto* s = std::get_if<LinearSource>(&src)) {
    auto cfg = linear_config(s->K, s->m, n, s->d, s->intervals, s->sparsity, seed);
    cfg.noise_std = s->noise_std;
    cfg.test_size = s->test_size;
    return gen_linear_clusters(cfg);
  }
  if (const auto* s = std::get_if<LogisticSource>(&src)) {
    auto design = four_cluster_logistic_design(s->m, n, seed);
    design.cfg.test_size = s->test_size;
    return gen_logistic_clusters(design.cfg, design.covariances, design.centers);
  }
  const auto& s = std::get<LabelFlipSource>(src);
  const LabeledSet pool = s.table ? ingest_labeled_table(*s.table, s.schema)
                                  : gen_two_class_pool(s.d, s.per_class, s.mean_shift, seed);
  return shard_label_flip(pool, s.m, n, seed);
}

struct ReportRow {
  std::string method;
  int n = 0;
  std::uint64_t seed = 0;
  std::optional<double> normalized_mse;
  std::optional<double> test_accuracy;
  std::optional<bool> exact_recovery;
  int k_prime = 0;
  int comm_rounds = 0;
  double wall_time_ms = 0.0;
  std::string error;
};

inline const char* kReportHeader =
    "method,n,seed,normalized_mse,test_accuracy,exact_recovery,k_prime,comm_rounds,wall_time_ms";

inline void write_row(std::ostream& os, const ReportRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? csv::format(*v) : std::string(); };
  os << r.method << ',' << r.n << ',' << r.seed << ',' << opt(r.normalized_mse) << ','
     << opt(r.test_accuracy) << ',' << (r.exact_recovery ? (*r.exact_recovery ? "1" : "0") : "")
     << ',' << r.k_prime << ',' << r.comm_rounds << ',' << csv::format(r.wall_time_ms) << '\n';
}

inline std::vector<ReportRow> read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot read report '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(in, line) || csv::trim(line) != kReportHeader) {
    throw ParseError("report '" + path.string() + "' has an unexpected header");
  }
  std::vector<ReportRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::is_blank(line)) {
      continue;
    }
    const auto f = csv::split(line);
    if (f.size() != 9) {
      throw ParseError("report line " + std::to_string(lineno) + ": expected 9 fields");
    }
    auto num = [&](std::string_view s) -> std::optional<double> {
      if (csv::trim(s).empty()) {
        return std::nullopt;
      }
      auto v = csv::parse_double(s);
      if (!v) {
        throw ParseError("report line " + std::to_string(lineno) + ": non-numeric cell");
      }
      return v;
    };
    ReportRow r;
    r.method = std::string(csv::trim(f[0]));
    r.n = static_cast<int>(num(f[1]).value_or(0));
    r.seed = static_cast<std::uint64_t>(num(f[2]).value_or(0));
    r.normalized_mse = num(f[3]);
    r.test_accuracy = num(f[4]);
    if (auto e = num(f[5])) {
      r.exact_recovery = *e != 0.0;
    }
    r.k_prime = static_cast<int>(num(f[6]).value_or(0));
    r.comm_rounds = static_cast<int>(num(f[7]).value_or(0));
    r.wall_time_ms = num(f[8]).value_or(0.0);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace detail {

inline nlohmann::json stats(std::vector<double> v) {
  nlohmann::json j;
  j["count"] = v.size();
  if (v.empty()) {
    return j;
  }
  double mean = 0.0;
  for (double x : v) {
    mean += x;
  }
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) {
    var += (x - mean) * (x - mean);
  }
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  j["mean"] = mean;
  j["std"] = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  j["median"] = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return j;
}

}  // namespace detail

// Per method and n: mean/std/median of the metrics over seeds. Wall time is
// left out so summaries are reproducible.
inline nlohmann::json summarize(const std::vector<ReportRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::map<int, std::vector<const ReportRow*>>> groups;
  for (const auto& r : rows) {
    if (!groups.count(r.method)) {
      order.push_back(r.method);
    }
    groups[r.method][r.n].push_back(&r);
  }
  nlohmann::json out = nlohmann::json::object();
  out["methods"] = nlohmann::json::array();
  for (const auto& name : order) {
    nlohmann::json mj;
    mj["method"] = name;
    mj["by_n"] = nlohmann::json::array();
    for (const auto& [n, rs] : groups[name]) {
      std::vector<double> mse, acc, exact;
      std::vector<int> rounds;
      for (const auto* r : rs) {
        if (r->normalized_mse) {
          mse.push_back(*r->normalized_mse);
        }
        if (r->test_accuracy) {
          acc.push_back(*r->test_accuracy);
        }
        if (r->exact_recovery) {
          exact.push_back(*r->exact_recovery ? 1.0 : 0.0);
        }
        rounds.push_back(r->comm_rounds);
      }
      nlohmann::json nj;
      nj["n"] = n;
      nj["rows"] = rs.size();
      nj["normalized_mse"] = detail::stats(mse);
      nj["test_accuracy"] = detail::stats(acc);
      nj["exact_recovery"] = detail::stats(exact);
      nj["comm_rounds"] = *std::max_element(rounds.begin(), rounds.end());
      mj["by_n"].push_back(nj);
    }
    out["methods"].push_back(mj);
  }
  return out;
}

inline std::vector<Vec> ifca_initial_models(const MethodSpec& ms, const FederatedDataset& data,
                                            const LossSpec& loss, std::uint64_t seed) {
  const int K = ms.ifca_K > 0 ? ms.ifca_K : count_clusters(data.true_assignment);
  const int p = loss.num_params(data.feature_dim);
  if (ms.ifca_init == IfcaInit::kRandom) {
    return ifca_random_init(K, p, ms.init_scale, seed);
  }
  require(K == count_clusters(data.true_assignment),
          "IFCA shell and oracle_noise initializations need K equal to the true cluster count");
  std::vector<Vec> centers;
  if (ms.ifca_init == IfcaInit::kShell && data.true_models) {
    for (int k = 0; k < K; ++k) {
      centers.push_back(data.true_params(k, loss.has_intercept));
    }
  } else {
    const auto co = baseline_cluster_oracle(data, loss);
    centers.resize(static_cast<std::size_t>(K));
    for (std::size_t i = 0; i < data.true_assignment.size(); ++i) {
      centers[static_cast<std::size_t>(data.true_assignment[i])] = co.per_user_models[i];
    }
  }
  if (ms.ifca_init == IfcaInit::kShell) {
    return ifca_shell_init(centers, seed);
  }
  for (std::size_t k = 0; k < centers.size(); ++k) {
    Rng rng(seed, {Domain::kIfcaInit, 2000 + k});
    for (Index j = 0; j < centers[k].size(); ++j) {
      centers[k][j] += ms.init_scale * rng.normal();
    }
  }
  return centers;
}

inline ProtocolOutput run_method(const MethodSpec& ms, const FederatedDataset& data,
                                 const LossSpec& loss, std::uint64_t seed) {
  switch (ms.type) {
    case MethodType::kOdcl: {
      ProtocolConfig p = ms.protocol;
      p.seed = seed;
      p.sgd.seed = seed;
      p.threads = 1;
      return odcl_run(data, loss, p);
    }
    case MethodType::kOracleAvg:
      return baseline_oracle_avg(data, loss);
    case MethodType::kLocal:
      return baseline_local(data, loss);
    case MethodType::kNaive:
      return baseline_naive(data, loss);
    case MethodType::kClusterOracle:
      return baseline_cluster_oracle(data, loss);
    case MethodType::kIfca: {
      IfcaOptions opt = ms.ifca;
      opt.seed = seed;
      opt.threads = 1;
      return ifca_run(data, loss, ifca_initial_models(ms, data, loss, seed), ms.step, ms.rounds,
                      ms.ifca_mode, opt);
    }
  }
  throw InvalidArgument("unknown method type");
}

inline ReportRow score(const std::string& method, int n, std::uint64_t seed,
                       const ProtocolOutput& out, const FederatedDataset& data,
                       const LossSpec& loss) {
  ReportRow r;
  r.method = method;
  r.n = n;
  r.seed = seed;
  if (data.true_models) {
    r.normalized_mse = normalized_mse(out, data);
  }
  if (loss.kind == LossKind::kLogistic && data.has_test_sets()) {
    r.test_accuracy = test_accuracy(out, data, loss);
  }
  const auto rs = recovery_stats(out.server_clustering, data.true_assignment);
  r.exact_recovery = rs.exact;
  r.k_prime = rs.k_prime;
  r.comm_rounds = out.comm_rounds;
  return r;
}

struct ExperimentResult {
  std::vector<ReportRow> rows;
  int failures = 0;
};

using Logger = std::function<void(const std::string&)>;

// Jobs are (n, seed) pairs: one dataset is generated per pair and every
// method runs on it. Rows come out in (n, seed, method) order regardless of
// the thread count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Logger& log = {}) {
  const std::size_t S = cfg.seeds.size();
  const std::size_t M = cfg.methods.size();
  std::vector<ReportRow> rows(cfg.sweep.size() * S * M);
  std::mutex log_mu;
  auto say = [&](const std::string& msg) {
    if (log) {
      std::lock_guard lock(log_mu);
      log(msg);
    }
  };
  parallel_for(cfg.sweep.size() * S, cfg.threads, [&](std::size_t job) {
    const int n = cfg.sweep[job / S];
    const std::uint64_t seed = cfg.seeds[job % S];
    std::optional<FederatedDataset> data;
    std::string data_error;
    try {
      data = make_dataset(cfg.data, n, seed);
    } catch (const std::exception& e) {
      data_error = e.what();
    }
    for (std::size_t k = 0; k < M; ++k) {
      const auto& ms = cfg.methods[k];
      ReportRow& row = rows[job * M + k];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        if (!data) {
          throw InvalidArgument("data generation failed: " + data_error);
        }
        row = score(ms.name, n, seed, run_method(ms, *data, cfg.loss, seed), *data, cfg.loss);
      } catch (const std::exception& e) {
        row = ReportRow{};
        row.method = ms.name;
        row.n = n;
        row.seed = seed;
        row.error = e.what();
      }
      row.wall_time_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (!row.error.empty()) {
        say("error: " + ms.name + " n=" + std::to_string(n) + " seed=" + std::to_string(seed) +
            ": " + row.error);
      } else {
        say("done: " + ms.name + " n=" + std::to_string(n) + " seed=" + std::to_string(seed));
      }
    }
  });
  ExperimentResult res;
  for (const auto& r : rows) {
    res.failures += r.error.empty() ? 0 : 1;
  }
  res.rows = std::move(rows);
  return res;
}

inline void write_report(const std::filesystem::path& dir, const std::vector<ReportRow>& rows) {
  std::filesystem::create_directories(dir);
  std::ofstream csv_out(dir / "report.csv");
  csv_out << kReportHeader << '\n';
  for (const auto& r : rows) {
    write_row(csv_out, r);
  }
  std::ofstream(dir / "summary.json") << summarize(rows).dump(2) << '\n';
}

}  // namespace odcl
