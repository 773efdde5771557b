#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lrmfg/core/interaction.hpp"
#include "lrmfg/core/measure.hpp"
#include "lrmfg/nplayer/costs.hpp"
#include "lrmfg/nplayer/simulate.hpp"
#include "lrmfg/solver/mfg.hpp"

namespace lrmfg {

enum class DeviationMode {
  Auto,      // exact when F_N and G_N are linear in the measure
  Exact,     // HJB against the mixed opponent flow
  Heuristic  // HJB against plug-in Monte-Carlo sources
};

struct DeviationOptions {
  DeviationMode mode = DeviationMode::Auto;
  Integrator integrator = Integrator::RK4;
  std::size_t heuristic_samples = 64;
  std::uint64_t seed = 0;
};

struct DeviationValue {
  double value = 0.0;           // sum_x p0_i(x) V_i(0, x)
  bool heuristic = false;
  std::vector<double> initial;  // V_i(0, .)
};

/// Laws q_j(t) of every player under its equilibrium feedback, as a flow
/// whose "cells" are players.
inline MeasureFlow player_laws(const PlayerFeedbacks& fb, const std::vector<double>& initial, const TimeGrid& grid,
                               Integrator integrator = Integrator::RK4) {
  const std::size_t n = fb.players(), d = fb.states();
  const Policy& src = fb.policy();
  if (src.times() != grid.points()) throw GridMismatch("player_laws: policy does not match time grid");
  Policy per_player(src.times(), n, d);
  for (std::size_t k = 0; k < src.times(); ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t x = 0; x < d; ++x) {
        auto from = src.row(k, fb.cell(i), x);
        std::copy(from.begin(), from.end(), per_player.row(k, i, x).begin());
      }
  return solve_kolmogorov_forward(per_player, initial, grid, integrator);
}

/// Single-player deviation problems against independent opponents that
/// follow their equilibrium feedbacks.
///
/// The deviation class is Markov feedback in (t, own state). For costs
/// linear in the measure, the expected running cost against independent
/// opponents is the cost against their mixed law, so the HJB value is the
/// exact optimum of that class. Otherwise sources are plug-in averages over
/// sampled opponent configurations and the value is labelled heuristic.
class DeviationSolver {
public:
  DeviationSolver(CostModel cost, InteractionSpec running, InteractionSpec terminal, PlayerLayout layout,
                  const PlayerFeedbacks& fb, std::vector<double> initial, TimeGrid grid, DeviationOptions options = {})
      : cost_(std::move(cost)), running_(std::move(running)), terminal_(std::move(terminal)),
        layout_(std::move(layout)), grid_(std::move(grid)), options_(options), fb_(fb),
        initial_(std::move(initial)) {
    require(layout_.size() == fb_.players(), "DeviationSolver: layout and feedbacks disagree on N");
    require(layout_.size() >= 2, "DeviationSolver: need at least two players");
    const bool linear = is_linear_in_measure(running_) && is_linear_in_measure(terminal_);
    if (options_.mode == DeviationMode::Exact && !linear)
      throw InvalidArgument("best_response_value: interaction is nonlinear in the measure; use heuristic mode");
    heuristic_ = options_.mode == DeviationMode::Heuristic || !linear;
    if (heuristic_) require(options_.heuristic_samples >= 1, "DeviationSolver: heuristic mode needs samples");
    for (const auto* spec : {&running_, &terminal_})
      if (std::holds_alternative<interaction::Local>(*spec))
        throw InvalidArgument("best_response_value: local interactions are not defined for N players");
    laws_ = player_laws(fb_, initial_, grid_, options_.integrator);
  }

  bool heuristic() const noexcept { return heuristic_; }
  const MeasureFlow& laws() const noexcept { return laws_; }

  /// F_N(x, ., u_i) averaged over opponents at every grid time, time-major.
  std::vector<double> running_source(std::size_t i) const { return source(running_, i, 0, grid_.points()); }
  std::vector<double> terminal_source(std::size_t i) const {
    return source(terminal_, i, grid_.steps(), 1);
  }

  DeviationValue best_response(std::size_t i) const {
    auto src = running_source(i);
    auto term = terminal_source(i);
    auto v = solve_hjb_cell(cost_, layout_.position(i), src, term, grid_, options_.integrator, i);
    return {initial_value(i, v), heuristic_, std::vector<double>(v.begin(), v.begin() + d())};
  }

  /// Expected cost of player i under its own equilibrium feedback, from
  /// the policy-evaluation ODE with slab-constant rates.
  double equilibrium_cost(std::size_t i) const {
    auto src = running_source(i);
    auto term = terminal_source(i);
    const std::size_t n = grid_.steps(), dd = d();
    const double dt = grid_.dt(), u = layout_.position(i);
    std::vector<double> w(term.begin(), term.end()), k1(dd), k2(dd), k3(dd), k4(dd), stage(dd), lk(dd), mid(dd);
    for (std::size_t k = n; k-- > 0;) {
      for (std::size_t x = 0; x < dd; ++x) lk[x] = cost_.value(x, fb_.rates(i, k, x), u);
      auto rhs = [&](std::span<const double> val, std::span<const double> s, std::span<double> out) {
        for (std::size_t x = 0; x < dd; ++x) {
          auto a = fb_.rates(i, k, x);
          double acc = lk[x] + s[x];
          for (std::size_t y = 0; y < dd; ++y)
            if (y != x) acc += a[y] * (val[y] - val[x]);
          out[x] = acc;
        }
      };
      std::span<const double> s_next(src.data() + (k + 1) * dd, dd), s_now(src.data() + k * dd, dd);
      for (std::size_t x = 0; x < dd; ++x) mid[x] = 0.5 * (s_now[x] + s_next[x]);
      rhs(w, s_next, k1);
      for (std::size_t x = 0; x < dd; ++x) stage[x] = w[x] + 0.5 * dt * k1[x];
      rhs(stage, mid, k2);
      for (std::size_t x = 0; x < dd; ++x) stage[x] = w[x] + 0.5 * dt * k2[x];
      rhs(stage, mid, k3);
      for (std::size_t x = 0; x < dd; ++x) stage[x] = w[x] + dt * k3[x];
      rhs(stage, s_now, k4);
      for (std::size_t x = 0; x < dd; ++x) w[x] += dt / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
    }
    double s = 0.0;
    for (std::size_t x = 0; x < dd; ++x) s += initial_[i * dd + x] * w[x];
    return s;
  }

private:
  std::size_t d() const noexcept { return fb_.states(); }

  double initial_value(std::size_t i, const std::vector<double>& v) const {
    double s = 0.0;
    for (std::size_t x = 0; x < d(); ++x) s += initial_[i * d() + x] * v[x];
    return s;
  }

  std::vector<double> source(const InteractionSpec& spec, std::size_t i, std::size_t first, std::size_t count) const {
    const std::size_t n = layout_.size(), dd = d();
    std::vector<double> out(count * dd, 0.0);
    if (is_zero(spec)) return out;
    const double u = layout_.position(i);
    if (!heuristic_) {
      const auto& tb = std::get<interaction::TwoBody>(spec);
      const double w = 1.0 / static_cast<double>(n - 1);
      std::vector<double> weight(n, 0.0), occ(dd);
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) weight[j] = tb.kernel(u, layout_.position(j)) * w;
      for (std::size_t k = 0; k < count; ++k) {
        std::fill(occ.begin(), occ.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          auto q = laws_.at(first + k, j);
          for (std::size_t y = 0; y < dd; ++y) occ[y] += weight[j] * q[y];
        }
        for (std::size_t x = 0; x < dd; ++x) {
          double s = 0.0;
          for (std::size_t y = 0; y < dd; ++y) s += tb.f(x, y) * occ[y];
          out[k * dd + x] = s;
        }
      }
      return out;
    }
    std::vector<std::size_t> states(n);
    for (std::size_t k = 0; k < count; ++k) {
      for (std::size_t s = 0; s < options_.heuristic_samples; ++s) {
        CounterRng rng(options_.seed, 0x64657669, (first + k) * options_.heuristic_samples + s);
        for (std::size_t j = 0; j < n; ++j) {
          // Player i's own state does not enter its empirical measure.
          states[j] = sample_categorical(rng, laws_.at(first + k, j), 1.0);
        }
        auto m = empirical_measure(layout_, states, i);
        for (std::size_t x = 0; x < dd; ++x) out[k * dd + x] += eval_interaction(spec, x, m, u);
      }
      for (std::size_t x = 0; x < dd; ++x) out[k * dd + x] /= static_cast<double>(options_.heuristic_samples);
    }
    return out;
  }

  CostModel cost_;
  InteractionSpec running_, terminal_;
  PlayerLayout layout_;
  TimeGrid grid_;
  DeviationOptions options_;
  PlayerFeedbacks fb_;
  std::vector<double> initial_;
  MeasureFlow laws_;
  bool heuristic_ = false;
};

/// D_i for player i against the equilibrium feedbacks of the others.
inline DeviationValue best_response_value(std::size_t i, const EquilibriumResult& eq, const SimConfig& config,
                                          const CostModel& cost, const InteractionSpec& running,
                                          const InteractionSpec& terminal, const Discretization& disc,
                                          const InitialDistribution& m0, DeviationOptions options = {}) {
  PlayerFeedbacks fb(eq.policy, disc.atlas, config.layout);
  require(i < fb.players(), "best_response_value: player index out of range");
  DeviationSolver solver(cost, running, terminal, config.layout, fb, initial_laws(config, fb, m0), disc.time,
                         options);
  return solver.best_response(i);
}

struct PlayerGap {
  double position = 0.0;
  std::size_t cell = 0;
  PlayerCostEstimate cost;  // Monte-Carlo J_i and components
  double deviation = 0.0;   // D_i
  double gap = 0.0;         // max(0, J_i - D_i)
};

struct NashGapOptions {
  std::vector<double> eps_grid;
  double quantile = 0.9;
  DeviationOptions deviation;
};

struct NashGapReport {
  std::size_t players = 0, runs = 0;
  std::vector<PlayerGap> per_player;
  std::vector<std::pair<double, double>> delta;  // (eps, fraction of players with gap > eps)
  double eps_max = 0.0;                           // max gap
  double quantile = 0.9;
  double eps_quantile = 0.0;  // quantile of gaps
  double median_gap = 0.0;
  double max_se = 0.0;
  bool heuristic = false;
  std::string deviation_class;
};

/// Linear-interpolation quantile of `values` (q in [0, 1]).
inline double quantile_of(std::vector<double> values, double q) {
  require(!values.empty(), "quantile_of: empty sample");
  require(q >= 0.0 && q <= 1.0, "quantile_of: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  double pos = q * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline NashGapReport nash_gap_report(const EquilibriumResult& eq, const SimConfig& config, const CostModel& cost,
                                     const InteractionSpec& running, const InteractionSpec& terminal,
                                     const Discretization& disc, const InitialDistribution& m0,
                                     const NashGapOptions& options = {}) {
  PlayerFeedbacks fb(eq.policy, disc.atlas, config.layout);
  auto costs = monte_carlo_costs(config, fb, m0, disc.time, cost, running, terminal);
  DeviationSolver solver(cost, running, terminal, config.layout, fb, initial_laws(config, fb, m0), disc.time,
                         options.deviation);
  const std::size_t n = fb.players();
  NashGapReport rep;
  rep.players = n;
  rep.runs = costs.runs;
  rep.quantile = options.quantile;
  rep.heuristic = solver.heuristic();
  rep.deviation_class = rep.heuristic
                            ? "Markov feedback in (t, own state) against plug-in sampled opponents (heuristic)"
                            : "Markov feedback in (t, own state) against the mixed opponent flow";
  rep.per_player.resize(n);
  parallel_for(n, [&](std::size_t i) {
    auto& p = rep.per_player[i];
    p.position = config.layout.position(i);
    p.cell = fb.cell(i);
    p.cost = costs.players[i];
    p.deviation = solver.best_response(i).value;
    p.gap = std::max(0.0, p.cost.mean - p.deviation);
  });
  std::vector<double> gaps(n);
  for (std::size_t i = 0; i < n; ++i) {
    gaps[i] = rep.per_player[i].gap;
    rep.max_se = std::max(rep.max_se, rep.per_player[i].cost.se);
  }
  rep.eps_max = *std::max_element(gaps.begin(), gaps.end());
  rep.eps_quantile = quantile_of(gaps, options.quantile);
  rep.median_gap = quantile_of(gaps, 0.5);
  for (double eps : options.eps_grid) {
    auto above = std::count_if(gaps.begin(), gaps.end(), [eps](double g) { return g > eps; });
    rep.delta.emplace_back(eps, static_cast<double>(above) / static_cast<double>(n));
  }
  return rep;
}

}  // namespace lrmfg
