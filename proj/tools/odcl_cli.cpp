#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "odcl/odcl.hpp"

namespace fs = std::filesystem;
using namespace odcl;

namespace {

// Exit codes: 0 success, 1 runtime failure, 2 bad input.
constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kBadInput = 2;

struct Globals {
  std::optional<std::uint64_t> seed_override;
  int threads = 0;
  bool verbose = false;
};

ExperimentConfig load(const std::string& path, const Globals& g) {
  auto cfg = load_experiment(path);
  if (g.seed_override) {
    cfg.seeds = {*g.seed_override};
  }
  if (g.threads > 0) {
    cfg.threads = g.threads;
  }
  return cfg;
}

int cmd_run(const std::string& config, const std::string& out_dir, const Globals& g) {
  auto cfg = load(config, g);
  if (!out_dir.empty()) {
    cfg.output_dir = out_dir;
  }
  Logger log;
  if (g.verbose) {
    log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  } else {
    log = [](const std::string& msg) {
      if (msg.rfind("error:", 0) == 0) {
        std::cerr << msg << '\n';
      }
    };
  }
  const auto res = run_experiment(cfg, log);
  write_report(cfg.output_dir, res.rows);
  std::cerr << "wrote " << res.rows.size() << " rows to " << (cfg.output_dir / "report.csv").string()
            << '\n';
  if (res.failures > 0) {
    std::cerr << res.failures << " row(s) failed\n";
    return kFailed;
  }
  return kOk;
}

int cmd_gen(const std::string& config, const std::string& out_dir, std::optional<int> n,
            const Globals& g) {
  const auto cfg = load(config, g);
  const int nn = n.value_or(cfg.sweep.front());
  if (nn <= 0) {
    throw ConfigError("--n must be positive");
  }
  const auto ds = make_dataset(cfg.data, nn, cfg.seeds.front());
  export_dataset(ds, out_dir);
  std::cerr << "exported " << ds.num_users() << " users (n=" << nn
            << ", seed=" << cfg.seeds.front() << ") to " << out_dir << '\n';
  return kOk;
}

Mat read_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot read points file '" + path + "'");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::is_blank(line)) {
      continue;
    }
    std::vector<double> row;
    bool numeric = true;
    for (auto cell : csv::split(line)) {
      auto v = csv::parse_double(cell);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1) {
        continue;  // header
      }
      throw ParseError("line " + std::to_string(lineno) + ": non-numeric cell");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(rows.front().size()) + " fields");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw ParseError("points file '" + path + "' has no data rows");
  }
  Mat P(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      P(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return P;
}

struct ClusterArgs {
  std::string points;
  std::string algo = "kmeans_pp";
  double lambda = 0.1;
  int K = 2;
  int k_max = 10;
  std::string metric = "silhouette";
  std::uint64_t seed = 0;
};

int cmd_cluster(const ClusterArgs& a, const Globals& g) {
  const PointSet pts(read_points(a.points));
  const std::uint64_t seed = g.seed_override.value_or(a.seed);
  nlohmann::json j;
  ClusteringResult res;
  if (a.algo == "convex") {
    res = convex_cluster(pts, a.lambda);
  } else if (a.algo == "clusterpath") {
    auto cp = clusterpath_select(pts);
    std::ostringstream path;
    write_path_csv(path, cp.path);
    j["path_csv"] = path.str();
    j["warnings"] = cp.warnings;
    res = std::move(cp.clustering);
  } else if (a.algo == "kmeans_pp") {
    res = kmeans_pp(pts, a.K, seed);
  } else if (a.algo == "spectral") {
    res = spectral_kmeans(pts, a.K, seed);
  } else if (a.algo == "spectral_part1") {
    res = spectral_kmeans_part1(pts, a.K, seed);
  } else if (a.algo == "kmeans_estimated") {
    const KMetric metric = a.metric == "elbow" ? KMetric::kElbow : KMetric::kSilhouette;
    const int K = estimate_k(pts, std::min<int>(a.k_max, static_cast<int>(pts.size())), metric,
                             seed);
    res = kmeans_pp(pts, K, seed);
  } else {
    throw ConfigError("unknown --algo '" + a.algo + "'");
  }
  j["result"] = to_json(res);
  std::cout << j.dump(2) << '\n';
  return kOk;
}

int cmd_report(const std::string& dir) {
  if (!fs::is_directory(dir) || fs::is_empty(dir)) {
    std::cerr << "error: '" << dir << "' is missing or empty\n";
    return kBadInput;
  }
  const fs::path report = fs::path(dir) / "report.csv";
  if (!fs::exists(report)) {
    std::cerr << "error: no report.csv in '" << dir << "'\n";
    return kBadInput;
  }
  const auto rows = read_report(report);
  const auto summary = summarize(rows);
  std::ofstream(fs::path(dir) / "summary.json") << summary.dump(2) << '\n';
  std::cout << summary.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-shot distributed clustered learning simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed_override = 0;
  auto* seed_opt = app.add_option("--seed-override", seed_override,
                                  "Replace the configured seeds with this one")
                       ->check(CLI::NonNegativeNumber);
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", g.verbose, "Log progress to stderr");

  auto* run = app.add_subcommand("run", "Run an experiment config");
  std::string run_config, run_out;
  run->add_option("config", run_config, "Experiment JSON")->required();
  run->add_option("--out", run_out, "Output directory (overrides output_dir)");

  auto* gen = app.add_subcommand("gen", "Export the dataset of a config");
  std::string gen_config, gen_out;
  std::optional<int> gen_n;
  gen->add_option("config", gen_config, "Experiment JSON")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--n", gen_n, "Samples per user (default: first sweep value)");

  auto* cluster = app.add_subcommand("cluster", "Cluster the rows of a CSV point file");
  ClusterArgs ca;
  cluster->add_option("points", ca.points, "CSV of points, one per row")->required();
  cluster->add_option("--algo", ca.algo, "convex|clusterpath|kmeans_pp|spectral|spectral_part1|kmeans_estimated")
      ->check(CLI::IsMember({"convex", "clusterpath", "kmeans_pp", "spectral", "spectral_part1",
                             "kmeans_estimated"}));
  cluster->add_option("--lambda", ca.lambda, "Fusion penalty for convex clustering")
      ->check(CLI::PositiveNumber);
  cluster->add_option("--K", ca.K, "Number of clusters")->check(CLI::PositiveNumber);
  cluster->add_option("--k-max", ca.k_max, "Largest K tried by kmeans_estimated")
      ->check(CLI::PositiveNumber);
  cluster->add_option("--metric", ca.metric, "silhouette|elbow")
      ->check(CLI::IsMember({"silhouette", "elbow"}));
  cluster->add_option("--seed", ca.seed, "Seed");

  auto* report = app.add_subcommand("report", "Re-summarize a report directory");
  std::string report_dir;
  report->add_option("dir", report_dir, "Directory holding report.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadInput;
  }
  if (seed_opt->count() > 0) {
    g.seed_override = seed_override;
  }

  try {
    if (*run) {
      return cmd_run(run_config, run_out, g);
    }
    if (*gen) {
      return cmd_gen(gen_config, gen_out, gen_n, g);
    }
    if (*cluster) {
      return cmd_cluster(ca, g);
    }
    return cmd_report(report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kBadInput;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kBadInput;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
}
