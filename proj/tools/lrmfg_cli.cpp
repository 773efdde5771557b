// lrmfg command-line driver: solve, simulate, nash-gap, graphon, check-monotone.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lrmfg/io/config.hpp"
#include "lrmfg/io/results.hpp"
#include "lrmfg/lrmfg.hpp"

namespace fs = std::filesystem;
using namespace lrmfg;
using namespace lrmfg::io;

namespace {

enum Exit : int { kOk = 0, kInvalid = 1, kNotConverged = 2, kNotMonotone = 3 };

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  bool dump = false;
};

struct Context {
  ExperimentConfig cfg;
  fs::path out;
};

Context prepare(const Options& opt) {
  Context ctx{load_config(opt.config), {}};
  if (opt.seed) ctx.cfg.override_seed(*opt.seed);
  ctx.out = opt.out ? fs::path(*opt.out) : fs::path(ctx.cfg.output.directory);
  return ctx;
}

void make_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidArgument("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

SolverConfig solver_config(const ExperimentConfig& cfg, const Discretization& disc) {
  SolverConfig s = cfg.solver;
  if (cfg.random_init_seed) s.initial_flow = random_flow(disc, *cfg.random_init_seed);
  return s;
}

std::string short_number(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 4);
  return std::string(buf, r.ptr);
}

json solve_summary(const EquilibriumResult& eq) {
  return {{"converged", eq.converged},
          {"iterations", eq.iterations},
          {"final_residual", eq.residual_history.empty() ? 0.0 : eq.residual_history.back()},
          {"residual_history", eq.residual_history},
          {"capped_rates", eq.capped_rates},
          {"warnings", eq.warnings}};
}

int cmd_solve(const Options& opt) {
  auto ctx = prepare(opt);
  const auto& m = ctx.cfg.need_model();
  auto disc = m.discretization();
  auto started = std::chrono::steady_clock::now();
  auto eq = solve_mfg(m.cost, m.running, m.terminal, m.m0, disc, solver_config(ctx.cfg, disc));
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  make_out(ctx.out);
  write_equilibrium(ctx.out, eq, disc);
  json summary = solve_summary(eq);
  summary["wall_seconds"] = seconds;
  summary["timestamp"] = utc_timestamp();
  summary["config"] = normalized(ctx.cfg);
  write_json(ctx.out / "summary.json", summary);
  std::cout << "solve: " << (eq.converged ? "converged" : "did not converge") << " after " << eq.iterations
            << " iterations, residual " << short_number(summary["final_residual"].get<double>()) << "\n";
  for (const auto& w : eq.warnings) std::cerr << "warning: " << w << "\n";
  return eq.converged ? kOk : kNotConverged;
}

/// Equilibrium from a previous `solve` run or solved here. Empty when the
/// in-run solve does not converge.
std::optional<EquilibriumResult> equilibrium(const Context& ctx) {
  const auto& m = ctx.cfg.need_model();
  auto disc = m.discretization();
  if (const auto& dir = ctx.cfg.simulation.load_equilibrium) return load_equilibrium(*dir, disc);
  auto eq = solve_mfg(m.cost, m.running, m.terminal, m.m0, disc, solver_config(ctx.cfg, disc));
  if (!eq.converged) {
    std::cerr << "error: equilibrium solve did not converge after " << eq.iterations << " iterations\n";
    return std::nullopt;
  }
  return eq;
}

SimConfig sim_config(const SimulationConfig& s, std::size_t k) {
  SimConfig c{s.layout(k), s.runs_at(k), s.seed};
  c.rate_cap = s.rate_cap;
  return c;
}

int cmd_simulate(const Options& opt) {
  auto ctx = prepare(opt);
  const auto& m = ctx.cfg.need_model();
  auto disc = m.discretization();
  auto eq = equilibrium(ctx);
  if (!eq) return kNotConverged;
  make_out(ctx.out);
  const auto& s = ctx.cfg.simulation;
  CsvWriter costs((ctx.out / "costs.csv").string(), {"n_players", "player", "position", "cell", "cost", "se",
                                                      "running", "interaction", "terminal"});
  for (std::size_t k = 0; k < s.sweep_size(); ++k) {
    auto sc = sim_config(s, k);
    PlayerFeedbacks fb(eq->policy, disc.atlas, sc.layout);
    auto batch = simulate(sc, fb, m.m0, disc.time);
    auto est = estimate_costs(batch, m.cost, m.running, m.terminal, sc.layout, fb, disc.time);
    const std::size_t n = sc.layout.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = est.players[i];
      costs.row(n, i, sc.layout.position(i), fb.cell(i), p.mean, p.se, p.running, p.interaction, p.terminal);
    }
    if (ctx.cfg.output.trajectories)
      write_trajectories(ctx.out / ("trajectories_N" + std::to_string(n) + ".csv"), batch);
    std::cout << "simulate: N=" << n << ", " << sc.n_runs << " runs\n";
  }
  costs.close();
  return kOk;
}

int cmd_nash_gap(const Options& opt) {
  auto ctx = prepare(opt);
  const auto& m = ctx.cfg.need_model();
  auto disc = m.discretization();
  auto eq = equilibrium(ctx);
  if (!eq) return kNotConverged;
  const auto& s = ctx.cfg.simulation;
  NashGapOptions ngo{s.eps_grid, s.quantile, s.deviation};
  std::vector<NashGapReport> reports;
  for (std::size_t k = 0; k < s.sweep_size(); ++k) {
    reports.push_back(nash_gap_report(*eq, sim_config(s, k), m.cost, m.running, m.terminal, disc, m.m0, ngo));
    const auto& r = reports.back();
    std::cout << "nash-gap: N=" << r.players << ", eps_max " << short_number(r.eps_max) << ", max SE "
              << short_number(r.max_se) << (r.heuristic ? " (heuristic deviation)" : "") << "\n";
  }

  make_out(ctx.out);
  json doc{{"reports", json::array()}, {"config", normalized(ctx.cfg)}};
  CsvWriter gaps((ctx.out / "gaps.csv").string(),
                 {"n_players", "player", "position", "cell", "cost", "se", "deviation", "gap"});
  CsvWriter sweep((ctx.out / "sweep.csv").string(),
                  {"n_players", "runs", "eps_max", "eps_quantile", "median_gap", "max_se", "heuristic"});
  CsvWriter delta((ctx.out / "delta.csv").string(), {"n_players", "eps", "delta"});
  for (const auto& r : reports) {
    doc["reports"].push_back(to_json(r));
    for (std::size_t i = 0; i < r.players; ++i) {
      const auto& p = r.per_player[i];
      gaps.row(r.players, i, p.position, p.cell, p.cost.mean, p.cost.se, p.deviation, p.gap);
    }
    sweep.row(r.players, r.runs, r.eps_max, r.eps_quantile, r.median_gap, r.max_se,
              std::string(r.heuristic ? "true" : "false"));
    for (const auto& [eps, frac] : r.delta) delta.row(r.players, eps, frac);
  }
  gaps.close();
  sweep.close();
  delta.close();
  write_json(ctx.out / "nash_gap.json", doc);
  return kOk;
}

int cmd_graphon(const Options& opt) {
  auto ctx = prepare(opt);
  const auto& g = ctx.cfg.need_graphon();
  make_out(ctx.out);
  CsvWriter out((ctx.out / "cutnorm.csv").string(), {"n", "seed", "method", "value", "seconds"});
  std::map<std::pair<std::size_t, std::string>, std::vector<double>> values;
  for (std::size_t n : g.n) {
    auto disc = discretize_kernel(g.kernel, n);
    for (std::size_t s = 0; s < g.seeds; ++s) {
      std::uint64_t seed = g.seed + s;
      auto diff = sample_bernoulli_graph(g.kernel, n, seed) - disc;
      auto timed = [&](auto&& fn, const std::string& method) {
        auto t0 = std::chrono::steady_clock::now();
        double v = fn().value;
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.row(n, static_cast<std::size_t>(seed), method, v, secs);
        values[{n, method}].push_back(v);
      };
      timed([&] { return cut_norm_heuristic(diff, g.restarts, seed); }, "heuristic");
      if (n <= kExactNormMaxN) timed([&] { return cut_norm_exact(diff); }, "exact");
    }
  }
  out.close();
  json summary = json::array();
  for (const auto& [key, v] : values)
    summary.push_back({{"n", key.first}, {"method", key.second}, {"median", quantile_of(v, 0.5)},
                       {"max", *std::max_element(v.begin(), v.end())}});
  write_json(ctx.out / "graphon_summary.json", {{"medians", summary}, {"config", normalized(ctx.cfg)}});
  for (const auto& s : summary)
    std::cout << "graphon: n=" << s["n"].get<std::size_t>() << " " << s["method"].get<std::string>()
              << " median " << short_number(s["median"].get<double>()) << "\n";
  return kOk;
}

int cmd_check_monotone(const Options& opt) {
  auto ctx = prepare(opt);
  const auto& m = ctx.cfg.need_model();
  const auto& mc = ctx.cfg.monotonicity;
  auto running = check_monotonicity(m.running, m.atlas, m.states, mc.samples, mc.seed);
  auto terminal = check_monotonicity(m.terminal, m.atlas, m.states, mc.samples, mc.seed);
  make_out(ctx.out);
  json doc{{"min_value", std::min(running.min_value, terminal.min_value)},
           {"monotone", running.monotone() && terminal.monotone()},
           {"running", to_json(running)},
           {"terminal", to_json(terminal)}};
  for (const auto& [which, rep] : {std::pair{"running", &running}, std::pair{"terminal", &terminal}}) {
    if (!rep->violation) continue;
    doc["witness"] = to_json(*rep)["witness"];
    doc["witness"]["interaction"] = which;
    break;
  }
  write_json(ctx.out / "monotone.json", doc);
  std::cout << "check-monotone: min " << short_number(doc["min_value"].get<double>()) << " over " << mc.samples
            << " sampled pairs" << (doc["monotone"].get<bool>() ? "" : ", violated") << "\n";
  return doc["monotone"].get<bool>() ? kOk : kNotMonotone;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-range mean-field game toolkit"};
  app.require_subcommand(1);
  Options opt;
  std::string out;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  auto* out_opt = app.add_option("--out", out, "Output directory (overrides output.directory)");
  auto* threads_opt = app.add_option("--threads", threads, "Cap on worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Override every seed in the config");
  app.add_flag("--dump-normalized", opt.dump, "Print the normalized config and exit");

  std::map<std::string, int (*)(const Options&)> commands{{"solve", cmd_solve},
                                                          {"simulate", cmd_simulate},
                                                          {"nash-gap", cmd_nash_gap},
                                                          {"graphon", cmd_graphon},
                                                          {"check-monotone", cmd_check_monotone}};
  std::map<std::string, std::string> help{{"solve", "Solve the MFG system"},
                                          {"simulate", "Simulate the N-player game under equilibrium feedback"},
                                          {"nash-gap", "Estimate per-player Nash gaps, optionally over a sweep of N"},
                                          {"graphon", "Cut-norm study of sampled graphs against the kernel"},
                                          {"check-monotone", "Sample the monotonicity pairing of F and G"}};
  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name, help[name]);
    sub->add_option("config", opt.config, "Experiment config (JSON)")->required();
    sub->fallthrough();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  if (*out_opt) opt.out = out;
  if (*threads_opt) opt.threads = threads;
  if (*seed_opt) opt.seed = seed;
  if (opt.threads) set_max_threads(*opt.threads);

  std::string name = app.get_subcommands().front()->get_name();
  try {
    if (opt.dump) {
      auto ctx = prepare(opt);
      std::cout << normalized(ctx.cfg).dump(2) << "\n";
      return kOk;
    }
    return commands.at(name)(opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
}
