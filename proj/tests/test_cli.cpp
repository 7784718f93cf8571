#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "odcl/odcl.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(ODCL_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) {
    return r;
  }
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), p)) > 0) {
    r.out.append(buf.data(), got);
  }
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("odcl_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

json small_config() {
  return json::parse(R"({
    "data": {"kind": "linear", "K": 2, "m": 10, "d": 3,
             "intervals": [[0, 1], [3, 4]], "sparsity": 3},
    "methods": [
      {"type": "odcl", "name": "km", "algo": "kmeans_pp", "K": 2},
      {"type": "odcl", "name": "cc", "algo": "convex", "lambda_rule": "truth_bounds"},
      {"type": "naive"},
      {"type": "ifca", "name": "ifca", "mode": "gradient_avg", "rounds": 4}
    ],
    "sweep": [30, 60],
    "seeds": [1, 2, 3]
  })");
}

std::string rows_without_wall_time(const fs::path& report) {
  std::ifstream in(report);
  std::ostringstream os;
  std::string line;
  while (std::getline(in, line)) {
    os << line.substr(0, line.rfind(',')) << '\n';
  }
  return os.str();
}

}  // namespace

TEST(Cli, RunWritesReportAndSummary) {
  const auto dir = scratch("run");
  const auto cfg = write_config(dir, small_config());
  const auto r = cli("run " + cfg.string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.code, 0);
  ASSERT_TRUE(fs::exists(dir / "out" / "report.csv"));
  ASSERT_TRUE(fs::exists(dir / "out" / "summary.json"));
  EXPECT_TRUE(r.out.empty());
  const auto rows = odcl::read_report(dir / "out" / "report.csv");
  EXPECT_EQ(rows.size(), 24u);
  std::ifstream in(dir / "out" / "summary.json");
  const auto s = json::parse(in);
  EXPECT_EQ(s["methods"].size(), 4u);
}

TEST(Cli, ReportResummarizes) {
  const auto dir = scratch("report");
  const auto cfg = write_config(dir, small_config());
  ASSERT_EQ(cli("run " + cfg.string() + " --out " + dir.string()).code, 0);
  std::ifstream first(dir / "summary.json");
  const auto a = json::parse(first);
  fs::remove(dir / "summary.json");
  const auto r = cli("report " + dir.string());
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out), a);
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
}

TEST(Cli, ReportOnEmptyDirIsBadInput) {
  const auto dir = scratch("empty");
  EXPECT_EQ(cli("report " + dir.string()).code, 2);
  EXPECT_EQ(cli("report " + (dir / "missing").string()).code, 2);
}

TEST(Cli, BadConfigIsBadInput) {
  const auto dir = scratch("bad");
  auto j = small_config();
  j["sweep"] = json::array();
  EXPECT_EQ(cli("run " + write_config(dir, j).string()).code, 2);
  std::ofstream(dir / "config.json") << "{not json";
  EXPECT_EQ(cli("run " + (dir / "config.json").string()).code, 2);
  EXPECT_EQ(cli("run " + (dir / "nope.json").string()).code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
}

TEST(Cli, FailedRowsExitOne) {
  const auto dir = scratch("fail");
  auto j = small_config();
  j["methods"] = json::array({json{{"type", "odcl"}, {"name", "too_many"}, {"K", 50}},
                              json{{"type", "local"}}});
  j["sweep"] = json::array({20});
  const auto r = cli("run " + write_config(dir, j).string() + " --out " + dir.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(odcl::read_report(dir / "report.csv").size(), 6u);
}

TEST(Cli, GenExportsManifest) {
  const auto dir = scratch("gen");
  const auto cfg = write_config(dir, small_config());
  const auto r = cli("gen " + cfg.string() + " --out " + (dir / "data").string() + " --n 15");
  EXPECT_EQ(r.code, 0);
  std::ifstream in(dir / "data" / "manifest.json");
  ASSERT_TRUE(in.good());
  const auto m = json::parse(in);
  EXPECT_EQ(m["K"], 2);
  EXPECT_EQ(m["m"], 10);
  EXPECT_EQ(m["n"], 15);
  EXPECT_EQ(m["d"], 3);
  EXPECT_EQ(m["seed"], 1);
  EXPECT_EQ(m["true_assignment"].size(), 10u);
}

TEST(Cli, ClusterTinyLambdaGivesSingletons) {
  const auto dir = scratch("cluster");
  std::ofstream(dir / "pts.csv") << "x,y\n0,0\n0.1,0\n10,0\n10.1,0\n";
  auto r = cli("cluster " + (dir / "pts.csv").string() + " --algo convex --lambda 1e-9");
  ASSERT_EQ(r.code, 0);
  auto j = json::parse(r.out);
  EXPECT_EQ(j["result"]["k_prime"], 4);
  EXPECT_EQ(j["result"]["assignment"], json::array({0, 1, 2, 3}));

  r = cli("cluster " + (dir / "pts.csv").string() + " --algo kmeans_pp --K 2 --seed 3");
  ASSERT_EQ(r.code, 0);
  j = json::parse(r.out);
  EXPECT_EQ(j["result"]["assignment"], json::array({0, 0, 1, 1}));

  r = cli("cluster " + (dir / "pts.csv").string() + " --algo clusterpath");
  ASSERT_EQ(r.code, 0);
  j = json::parse(r.out);
  EXPECT_EQ(j["path_csv"].get<std::string>().rfind("lambda,k,objective,verified", 0), 0u);

  std::ofstream(dir / "ragged.csv") << "0,0\n1\n";
  EXPECT_EQ(cli("cluster " + (dir / "ragged.csv").string()).code, 2);
  EXPECT_EQ(cli("cluster " + (dir / "pts.csv").string() + " --algo dbscan").code, 2);
}

TEST(Cli, ReportsAreDeterministicAcrossThreadCounts) {
  const auto dir = scratch("threads");
  const auto cfg = write_config(dir, small_config());
  ASSERT_EQ(cli("--threads 1 run " + cfg.string() + " --out " + (dir / "a").string()).code, 0);
  ASSERT_EQ(cli("--threads 3 run " + cfg.string() + " --out " + (dir / "b").string()).code, 0);
  ASSERT_EQ(cli("--threads 3 run " + cfg.string() + " --out " + (dir / "c").string()).code, 0);
  const auto a = rows_without_wall_time(dir / "a" / "report.csv");
  EXPECT_EQ(a, rows_without_wall_time(dir / "b" / "report.csv"));
  EXPECT_EQ(a, rows_without_wall_time(dir / "c" / "report.csv"));
}

TEST(Cli, SeedOverrideReplacesSeeds) {
  const auto dir = scratch("seed");
  const auto cfg = write_config(dir, small_config());
  ASSERT_EQ(cli("--seed-override 7 run " + cfg.string() + " --out " + dir.string()).code, 0);
  const auto rows = odcl::read_report(dir / "report.csv");
  ASSERT_EQ(rows.size(), 8u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.seed, 7u);
  }
}
