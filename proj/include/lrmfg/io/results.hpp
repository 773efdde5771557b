#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "lrmfg/graphon/cut_norm.hpp"
#include "lrmfg/io/csv.hpp"
#include "lrmfg/io/json_source.hpp"
#include "lrmfg/nplayer/nash_gap.hpp"
#include "lrmfg/solver/monotonicity.hpp"

namespace lrmfg::io {

namespace fs = std::filesystem;

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

template <class Tag>
void write_cell_field(const fs::path& path, const CellField<Tag>& f, const Discretization& disc,
                      const std::string& column) {
  CsvWriter out(path.string(), {"t_index", "time", "cell", "position", "state", column});
  for (std::size_t k = 0; k < f.times(); ++k)
    for (std::size_t c = 0; c < f.cells(); ++c)
      for (std::size_t x = 0; x < f.states(); ++x)
        out.row(k, disc.time.time(k), c, disc.atlas.cell(c), x, f(k, c, x));
  out.close();
}

inline void write_policy(const fs::path& path, const Policy& p, const Discretization& disc) {
  CsvWriter out(path.string(), {"t_index", "time", "cell", "position", "from", "to", "rate"});
  for (std::size_t k = 0; k < p.times(); ++k)
    for (std::size_t c = 0; c < p.cells(); ++c)
      for (std::size_t x = 0; x < p.states(); ++x)
        for (std::size_t y = 0; y < p.states(); ++y)
          if (x != y) out.row(k, disc.time.time(k), c, disc.atlas.cell(c), x, y, p(k, c, x, y));
  out.close();
}

/// value.csv, flow.csv and policy.csv.
inline void write_equilibrium(const fs::path& dir, const EquilibriumResult& eq, const Discretization& disc) {
  write_cell_field(dir / "value.csv", eq.value, disc, "value");
  write_cell_field(dir / "flow.csv", eq.flow, disc, "mass");
  write_policy(dir / "policy.csv", eq.policy, disc);
}

namespace detail {

inline CsvTable open_artifact(const fs::path& path) {
  if (!fs::exists(path)) throw InvalidArgument("missing equilibrium artifact: " + path.string());
  return read_csv(path.string());
}

template <class Tag>
CellField<Tag> read_cell_field(const fs::path& path, const Discretization& disc, const std::string& column) {
  auto t = open_artifact(path);
  const std::size_t times = disc.time.points(), cells = disc.cells(), d = disc.states.size();
  auto ck = t.column("t_index"), cc = t.column("cell"), cx = t.column("state"), cv = t.column(column);
  if (t.rows.size() != times * cells * d)
    throw GridMismatch(path.string() + ": expected " + std::to_string(times * cells * d) + " rows for the model grid");
  CellField<Tag> f(times, cells, d);
  std::vector<bool> seen(times * cells * d, false);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto k = t.index(r, ck), c = t.index(r, cc), x = t.index(r, cx);
    if (k >= times || c >= cells || x >= d || seen[(k * cells + c) * d + x])
      throw GridMismatch(path.string() + ":" + std::to_string(r + 2) + ": index outside the model grid or repeated");
    seen[(k * cells + c) * d + x] = true;
    f(k, c, x) = t.number(r, cv);
  }
  return f;
}

}  // namespace detail

/// Reads the artifacts of write_equilibrium against the model grid.
inline EquilibriumResult load_equilibrium(const fs::path& dir, const Discretization& disc) {
  for (const char* name : {"value.csv", "flow.csv", "policy.csv"})
    if (!fs::exists(dir / name)) throw InvalidArgument("missing equilibrium artifact: " + (dir / name).string());
  EquilibriumResult eq;
  eq.value = detail::read_cell_field<ValueTag>(dir / "value.csv", disc, "value");
  eq.flow = detail::read_cell_field<MeasureTag>(dir / "flow.csv", disc, "mass");
  auto t = detail::open_artifact(dir / "policy.csv");
  const std::size_t times = disc.time.points(), cells = disc.cells(), d = disc.states.size();
  auto ck = t.column("t_index"), cc = t.column("cell"), cf = t.column("from"), ct = t.column("to"),
       cr = t.column("rate");
  if (t.rows.size() != times * cells * d * (d - 1))
    throw GridMismatch((dir / "policy.csv").string() + ": row count does not match the model grid");
  eq.policy = Policy(times, cells, d);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto k = t.index(r, ck), c = t.index(r, cc), x = t.index(r, cf), y = t.index(r, ct);
    if (k >= times || c >= cells || x >= d || y >= d || x == y)
      throw GridMismatch((dir / "policy.csv").string() + ":" + std::to_string(r + 2) + ": index outside the model grid");
    double rate = t.number(r, cr);
    if (!(rate >= 0.0)) throw InvalidArgument((dir / "policy.csv").string() + ": negative rate");
    eq.policy(k, c, x, y) = rate;
  }
  eq.induced_flow = eq.flow;
  eq.converged = true;
  return eq;
}

inline json to_json(const NashGapReport& r) {
  json players = json::array();
  for (const auto& p : r.per_player)
    players.push_back({{"position", p.position},
                       {"cell", p.cell},
                       {"cost", p.cost.mean},
                       {"se", p.cost.se},
                       {"running", p.cost.running},
                       {"interaction", p.cost.interaction},
                       {"terminal", p.cost.terminal},
                       {"deviation", p.deviation},
                       {"gap", p.gap}});
  json delta = json::array();
  for (const auto& [eps, frac] : r.delta) delta.push_back({{"eps", eps}, {"delta", frac}});
  return {{"players", r.players},
          {"runs", r.runs},
          {"eps_max", r.eps_max},
          {"quantile", r.quantile},
          {"eps_quantile", r.eps_quantile},
          {"median_gap", r.median_gap},
          {"max_se", r.max_se},
          {"heuristic", r.heuristic},
          {"deviation_class", r.deviation_class},
          {"delta", std::move(delta)},
          {"per_player", std::move(players)}};
}

inline json to_json(const MonotonicityReport& r) {
  json j{{"min_value", r.min_value}, {"samples", r.samples}, {"monotone", r.monotone()}};
  if (r.violation)
    j["witness"] = {{"sample", r.violation->sample},
                    {"value", r.violation->value},
                    {"m", r.violation->m},
                    {"m_tilde", r.violation->m_tilde}};
  return j;
}

inline json to_json(const NormEstimate& e) {
  return {{"value", e.value},
          {"method", e.method == NormMethod::Exact ? "exact" : "heuristic"},
          {"rows", e.rows},
          {"cols", e.cols}};
}

/// Columnar trajectories: one row per initial state and per jump.
inline void write_trajectories(const fs::path& path, const TrajectoryBatch& b) {
  CsvWriter out(path.string(), {"run", "player", "time", "state"});
  for (std::size_t r = 0; r < b.runs; ++r)
    for (std::size_t i = 0; i < b.players; ++i) {
      const auto& p = b.path(r, i);
      out.row(r, i, 0.0, p.initial_state);
      for (const auto& j : p.jumps) out.row(r, i, j.time, j.state);
    }
  out.close();
}

}  // namespace lrmfg::io
