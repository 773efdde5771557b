#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lrmfg/io/csv.hpp"
#include "lrmfg/io/json_source.hpp"

namespace fs = std::filesystem;
using lrmfg::io::json;
using lrmfg::io::read_csv;

namespace {

const fs::path kConfigs = LRMFG_CONFIG_DIR;

struct Outcome {
  int code;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("lrmfg_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  Outcome run(const std::string& args) {
    auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    std::string cmd = std::string(LRMFG_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
    int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  fs::path write(const std::string& name, const std::string& text) {
    auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_F(Cli, SolveDecoupled) {
  auto r = run("solve " + (kConfigs / "decoupled.json").string() + " --out " + (dir_ / "o").string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto s = read_json(dir_ / "o" / "summary.json");
  EXPECT_TRUE(s["converged"].get<bool>());
  EXPECT_EQ(s["iterations"], 1);
  EXPECT_EQ(s["final_residual"].get<double>(), 0.0);
  EXPECT_TRUE(s.contains("timestamp"));
  auto v = read_csv((dir_ / "o" / "value.csv").string());
  EXPECT_EQ(v.header, (std::vector<std::string>{"t_index", "time", "cell", "position", "state", "value"}));
  EXPECT_EQ(v.rows.size(), 51u * 5 * 2);
  EXPECT_EQ(read_csv((dir_ / "o" / "policy.csv").string()).rows.size(), 51u * 5 * 2);
  EXPECT_TRUE(fs::exists(dir_ / "o" / "flow.csv"));
}

TEST_F(Cli, SolveMonotoneInstance) {
  auto r = run("solve " + (kConfigs / "monotone_local.json").string() + " --out " + (dir_ / "o").string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto s = read_json(dir_ / "o" / "summary.json");
  EXPECT_LE(s["final_residual"].get<double>(), 1e-6);
  EXPECT_EQ(s["residual_history"].size(), s["iterations"].get<std::size_t>());
}

TEST_F(Cli, SolveReportsNonConvergence) {
  auto cfg = write("c.json", R"({"model": {"states": 2, "atlas": {"uniform": 4},
    "running": {"type": "local", "f": "identity"},
    "m0": {"split": 0.5, "below": [0.9, 0.1], "above": [0.3, 0.7]}},
    "solver": {"max_iterations": 2}})");
  auto r = run("solve " + cfg.string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_FALSE(read_json(dir_ / "o" / "summary.json")["converged"].get<bool>());
}

TEST_F(Cli, MalformedJsonWritesNothing) {
  auto cfg = write("bad.json", "{\n  \"model\": {\n    \"states\": 2,,\n  }\n}\n");
  auto out = dir_ / "never";
  for (const char* cmd : {"solve", "simulate", "nash-gap", "graphon", "check-monotone"}) {
    auto r = run(std::string(cmd) + " " + cfg.string() + " --out " + out.string());
    EXPECT_EQ(r.code, 1) << cmd;
    EXPECT_NE(r.err.find("bad.json:3:"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(out)) << cmd;
  }
}

TEST_F(Cli, SchemaErrorsAreLineNumbered) {
  auto cfg = write("c.json", "{\n  \"model\": {\"states\": 2},\n  \"solver\": {\n    \"dampng\": 0.3\n  }\n}\n");
  auto r = run("solve " + cfg.string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("c.json:4:"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("unknown key 'dampng'"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "o"));
  EXPECT_EQ(run("solve " + (dir_ / "missing.json").string()).code, 1);
  EXPECT_EQ(run("solve").code, 1);
  EXPECT_EQ(run("frobnicate x.json").code, 1);
}

TEST_F(Cli, DumpNormalizedRoundTrips) {
  auto r = run("solve " + (kConfigs / "two_body_sweep.json").string() + " --dump-normalized");
  ASSERT_EQ(r.code, 0) << r.err;
  auto again = run("solve " + write("n.json", r.out).string() + " --dump-normalized");
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(r.out, again.out);
  EXPECT_EQ(json::parse(r.out)["simulation"]["players"], json::array({10, 50, 200}));
  auto seeded = run("solve " + (kConfigs / "two_body_sweep.json").string() + " --seed 5 --dump-normalized");
  EXPECT_EQ(json::parse(seeded.out)["simulation"]["seed"], 5);
}

TEST_F(Cli, NashGapDecoupledWithinNoise) {
  auto r = run("nash-gap " + (kConfigs / "decoupled.json").string() + " --out " + (dir_ / "o").string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto t = read_csv((dir_ / "o" / "gaps.csv").string());
  ASSERT_EQ(t.rows.size(), 20u);
  auto gap = t.column("gap"), se = t.column("se");
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    EXPECT_GE(t.number(k, gap), 0.0);
    EXPECT_LE(t.number(k, gap), 3.0 * t.number(k, se));
  }
  auto doc = read_json(dir_ / "o" / "nash_gap.json");
  EXPECT_EQ(doc["reports"][0]["players"], 20);
  EXPECT_EQ(doc["reports"][0]["runs"], 2000);
}

TEST_F(Cli, NashGapSweepDecreases) {
  auto r = run("nash-gap " + (kConfigs / "two_body_sweep.json").string() + " --out " + (dir_ / "o").string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto t = read_csv((dir_ / "o" / "sweep.csv").string());
  ASSERT_EQ(t.rows.size(), 3u);
  auto n = t.column("n_players"), eps = t.column("eps_max");
  EXPECT_EQ(t.index(0, n), 10u);
  EXPECT_EQ(t.index(2, n), 200u);
  EXPECT_GT(t.number(0, eps), t.number(1, eps));
  EXPECT_GT(t.number(1, eps), t.number(2, eps));
  EXPECT_EQ(read_csv((dir_ / "o" / "gaps.csv").string()).rows.size(), 260u);
  EXPECT_EQ(read_csv((dir_ / "o" / "delta.csv").string()).rows.size(), 9u);
}

TEST_F(Cli, NashGapLoadMode) {
  auto solved = dir_ / "eq";
  auto base = json::parse(slurp(kConfigs / "two_body_sweep.json"));
  base["simulation"] = {{"players", 6}, {"runs", 200}, {"seed", 2}};
  auto in_run = write("solve.json", base.dump());
  ASSERT_EQ(run("solve " + in_run.string() + " --out " + solved.string()).code, 0);
  base["simulation"]["load_equilibrium"] = solved.string();
  auto loaded = write("load.json", base.dump());

  ASSERT_EQ(run("nash-gap " + in_run.string() + " --out " + (dir_ / "a").string()).code, 0);
  auto r = run("nash-gap " + loaded.string() + " --out " + (dir_ / "b").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "a" / "gaps.csv"), slurp(dir_ / "b" / "gaps.csv"));

  fs::remove(solved / "flow.csv");
  r = run("nash-gap " + loaded.string() + " --out " + (dir_ / "c").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("flow.csv"), std::string::npos) << r.err;
}

TEST_F(Cli, OutputsAreReproducible) {
  auto base = json::parse(slurp(kConfigs / "two_body_sweep.json"));
  base["simulation"] = {{"players", json::array({5, 9})}, {"runs", 300}, {"seed", 4}};
  auto cfg = write("c.json", base.dump());
  for (const char* cmd : {"solve", "nash-gap", "simulate"}) {
    ASSERT_EQ(run(std::string(cmd) + " " + cfg.string() + " --out " + (dir_ / "a").string()).code, 0) << cmd;
    ASSERT_EQ(run(std::string(cmd) + " " + cfg.string() + " --threads 1 --out " + (dir_ / "b").string()).code, 0);
  }
  for (const char* f : {"value.csv", "flow.csv", "policy.csv", "gaps.csv", "sweep.csv", "nash_gap.json", "costs.csv",
                        "trajectories_N5.csv", "trajectories_N9.csv"})
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  auto t = read_csv((dir_ / "a" / "trajectories_N9.csv").string());
  EXPECT_EQ(t.header, (std::vector<std::string>{"run", "player", "time", "state"}));
  EXPECT_GE(t.rows.size(), 300u * 9);
  EXPECT_EQ(read_csv((dir_ / "a" / "costs.csv").string()).rows.size(), 14u);
}

TEST_F(Cli, GraphonStudy) {
  auto r = run("graphon " + (kConfigs / "graphon.json").string() + " --out " + (dir_ / "o").string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto t = read_csv((dir_ / "o" / "cutnorm.csv").string());
  EXPECT_EQ(t.header, (std::vector<std::string>{"n", "seed", "method", "value", "seconds"}));
  auto cn = t.column("n"), cm = t.column("method"), cv = t.column("value"), cs = t.column("seed");
  std::map<std::pair<std::size_t, std::size_t>, std::map<std::string, double>> by;
  std::map<std::size_t, std::vector<double>> heuristic;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    by[{t.index(k, cn), t.index(k, cs)}][t.rows[k][cm]] = t.number(k, cv);
    if (t.rows[k][cm] == "heuristic") heuristic[t.index(k, cn)].push_back(t.number(k, cv));
  }
  for (std::size_t seed = 0; seed < 20; ++seed) {
    auto& row = by[{8, seed}];
    ASSERT_EQ(row.size(), 2u);
    EXPECT_LE(row["heuristic"], row["exact"] + 1e-12);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };
  EXPECT_LT(median(heuristic[256]), median(heuristic[32]));
  EXPECT_EQ(by.count({256, 0}), 1u);
  EXPECT_EQ((by[{256, 0}].count("exact")), 0u);
}

TEST_F(Cli, GraphonConstantKernelIsZero) {
  auto cfg = write("g.json", R"({"graphon": {"kernel": {"type": "constant", "value": 1.0}, "n": [8, 20], "seeds": 3}})");
  ASSERT_EQ(run("graphon " + cfg.string() + " --out " + (dir_ / "o").string()).code, 0);
  auto t = read_csv((dir_ / "o" / "cutnorm.csv").string());
  EXPECT_EQ(t.rows.size(), 3u * 2 + 3u);
  for (std::size_t k = 0; k < t.rows.size(); ++k) EXPECT_EQ(t.number(k, t.column("value")), 0.0);
}

TEST_F(Cli, CheckMonotone) {
  auto r = run("check-monotone " + (kConfigs / "monotone_local.json").string() + " --out " + (dir_ / "a").string());
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(read_json(dir_ / "a" / "monotone.json")["monotone"].get<bool>());

  r = run("check-monotone " + (kConfigs / "antimonotone.json").string() + " --out " + (dir_ / "b").string());
  EXPECT_EQ(r.code, 3) << r.err;
  auto doc = read_json(dir_ / "b" / "monotone.json");
  EXPECT_LT(doc["min_value"].get<double>(), -1e-10);
  ASSERT_TRUE(doc.contains("witness"));
  EXPECT_EQ(doc["witness"]["m"].size(), 8u);
  EXPECT_EQ(doc["witness"]["interaction"], "running");

  auto zero = write("z.json", R"({"model": {"states": 3, "atlas": {"uniform": 3}}})");
  r = run("check-monotone " + zero.string() + " --out " + (dir_ / "c").string());
  EXPECT_EQ(r.code, 0);
  doc = read_json(dir_ / "c" / "monotone.json");
  EXPECT_EQ(doc["min_value"].get<double>(), 0.0);
  EXPECT_FALSE(doc.contains("witness"));
}
