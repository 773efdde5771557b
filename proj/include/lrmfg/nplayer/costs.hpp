#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <tuple>
#include <vector>

#include "lrmfg/core/interaction.hpp"
#include "lrmfg/core/measure.hpp"
#include "lrmfg/core/parallel.hpp"
#include "lrmfg/nplayer/simulate.hpp"

namespace lrmfg {

struct CostComponents {
  double running = 0.0;      // integral of L
  double interaction = 0.0;  // integral of F_N
  double terminal = 0.0;     // G_N at T
  double total() const noexcept { return running + interaction + terminal; }
};

struct PlayerCostEstimate {
  double mean = 0.0;  // J_i estimate
  double se = 0.0;    // standard error of `mean`
  double running = 0.0, interaction = 0.0, terminal = 0.0;  // component means
};

struct CostEstimates {
  std::size_t runs = 0;
  std::vector<PlayerCostEstimate> players;
};

/// Realized cost of every player on one run.
///
/// L is integrated exactly over the segments of each player's own path.
/// F_N is piecewise constant between jumps of any player; two-body
/// interactions are updated incrementally at each jump, other kinds are
/// re-evaluated on the empirical measure.
class RunCostEvaluator {
public:
  RunCostEvaluator(const CostModel& cost, const InteractionSpec& running, const InteractionSpec& terminal,
                   const PlayerLayout& layout, const PlayerFeedbacks& fb, const TimeGrid& grid)
      : running_(running), terminal_(terminal), layout_(layout), grid_(grid),
        n_(layout.size()), d_(fb.states()) {
    require(fb.players() == n_, "RunCostEvaluator: layout and feedbacks disagree on N");
    if (n_ < 2 && (!is_zero(running) || !is_zero(terminal)))
      throw InvalidArgument("RunCostEvaluator: interactions need at least two players");
    lrate_.resize(n_ * grid.steps() * d_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t k = 0; k < grid.steps(); ++k)
        for (std::size_t x = 0; x < d_; ++x)
          lrate_[(i * grid.steps() + k) * d_ + x] = cost.value(x, fb.rates(i, k, x), layout.position(i));
    if (n_ >= 2) {
      prepare_pairs(running_, run_pairs_);
      prepare_pairs(terminal_, term_pairs_);
    }
  }

  std::size_t players() const noexcept { return n_; }

  void evaluate(std::span<const Path> paths, std::span<CostComponents> out) const {
    for (std::size_t i = 0; i < n_; ++i) {
      out[i] = {};
      out[i].running = integrate_running(i, paths[i]);
    }
    integrate_interaction(paths, out);
    if (!is_zero(terminal_)) {
      std::vector<std::size_t> final_states(n_);
      for (std::size_t i = 0; i < n_; ++i) final_states[i] = paths[i].final_state();
      auto values = evaluate_all(terminal_, term_pairs_, final_states);
      for (std::size_t i = 0; i < n_; ++i) out[i].terminal = values[i];
    }
  }

private:
  void prepare_pairs(const InteractionSpec& spec, std::vector<double>& pairs) const {
    auto* tb = std::get_if<interaction::TwoBody>(&spec);
    if (!tb) return;
    pairs.assign(n_ * n_, 0.0);
    const double w = 1.0 / static_cast<double>(n_ - 1);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        if (i != j) pairs[i * n_ + j] = tb->kernel(layout_.position(i), layout_.position(j)) * w;
  }

  double integrate_running(std::size_t i, const Path& p) const {
    const std::size_t steps = grid_.steps();
    const double* row = lrate_.data() + i * steps * d_;
    std::size_t x = p.initial_state, next = 0;
    double total = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      double a = grid_.time(k), end = grid_.time(k + 1);
      while (next < p.jumps.size() && p.jumps[next].time < end) {
        total += row[k * d_ + x] * (p.jumps[next].time - a);
        a = p.jumps[next].time;
        x = p.jumps[next].state;
        ++next;
      }
      total += row[k * d_ + x] * (end - a);
    }
    return total;
  }

  // F_N(x_i, m^{N,i}_x, u_i) for all players at one configuration.
  std::vector<double> evaluate_all(const InteractionSpec& spec, const std::vector<double>& pairs,
                                   const std::vector<std::size_t>& states) const {
    std::vector<double> out(n_, 0.0);
    if (is_zero(spec)) return out;
    if (auto* tb = std::get_if<interaction::TwoBody>(&spec)) {
      for (std::size_t i = 0; i < n_; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n_; ++j) s += pairs[i * n_ + j] * tb->f(states[i], states[j]);
        out[i] = s;
      }
      return out;
    }
    for (std::size_t i = 0; i < n_; ++i)
      out[i] = eval_interaction(spec, states[i], empirical_measure(layout_, states, i), layout_.position(i));
    return out;
  }

  void integrate_interaction(std::span<const Path> paths, std::span<CostComponents> out) const {
    if (is_zero(running_)) return;
    std::vector<std::tuple<double, std::size_t, std::size_t>> events;
    std::vector<std::size_t> states(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      states[i] = paths[i].initial_state;
      for (const auto& j : paths[i].jumps) events.emplace_back(j.time, i, j.state);
    }
    std::sort(events.begin(), events.end());

    const auto* tb = std::get_if<interaction::TwoBody>(&running_);
    // TwoBody: occ[i][y] = sum_{j != i} w_ij 1{x_j = y}, F_i = sum_y f(x_i, y) occ[i][y].
    std::vector<double> occ, value;
    auto refresh_one = [&](std::size_t i) {
      double s = 0.0;
      for (std::size_t y = 0; y < d_; ++y) s += tb->f(states[i], y) * occ[i * d_ + y];
      value[i] = s;
    };
    if (tb) {
      occ.assign(n_ * d_, 0.0);
      value.assign(n_, 0.0);
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) occ[i * d_ + states[j]] += run_pairs_[i * n_ + j];
      for (std::size_t i = 0; i < n_; ++i) refresh_one(i);
    } else {
      value = evaluate_all(running_, run_pairs_, states);
    }

    double t = 0.0;
    for (const auto& [time, who, to] : events) {
      double dt = time - t;
      for (std::size_t i = 0; i < n_; ++i) out[i].interaction += value[i] * dt;
      t = time;
      std::size_t from = states[who];
      states[who] = to;
      if (tb) {
        for (std::size_t i = 0; i < n_; ++i) {
          double w = run_pairs_[i * n_ + who];
          occ[i * d_ + from] -= w;
          occ[i * d_ + to] += w;
        }
        for (std::size_t i = 0; i < n_; ++i) refresh_one(i);
      } else {
        value = evaluate_all(running_, run_pairs_, states);
      }
    }
    double dt = grid_.horizon() - t;
    for (std::size_t i = 0; i < n_; ++i) out[i].interaction += value[i] * dt;
  }

  InteractionSpec running_, terminal_;
  PlayerLayout layout_;
  TimeGrid grid_;
  std::size_t n_, d_;
  std::vector<double> lrate_;  // L(x, alpha_i(k, x), u_i)
  std::vector<double> run_pairs_, term_pairs_;
};

namespace detail {

inline constexpr std::size_t kRunsPerChunk = 32;

// Per-chunk sufficient statistics: count, mean and M2 of J, component sums.
struct ChunkStats {
  std::size_t count = 0;
  std::vector<double> mean, m2, running, interaction, terminal;
};

inline ChunkStats chunk_stats(const std::vector<CostComponents>& runs, std::size_t count, std::size_t n) {
  ChunkStats cs;
  cs.count = count;
  cs.mean.assign(n, 0.0);
  cs.m2.assign(n, 0.0);
  cs.running.assign(n, 0.0);
  cs.interaction.assign(n, 0.0);
  cs.terminal.assign(n, 0.0);
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = runs[r * n + i];
      cs.mean[i] += c.total();
      cs.running[i] += c.running;
      cs.interaction[i] += c.interaction;
      cs.terminal[i] += c.terminal;
    }
  for (std::size_t i = 0; i < n; ++i) cs.mean[i] /= static_cast<double>(count);
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t i = 0; i < n; ++i) {
      double dev = runs[r * n + i].total() - cs.mean[i];
      cs.m2[i] += dev * dev;
    }
  return cs;
}

// Chan et al. pairwise combination, applied in chunk order.
inline CostEstimates combine(const std::vector<ChunkStats>& chunks, std::size_t n) {
  CostEstimates est;
  est.players.assign(n, {});
  std::vector<double> mean(n, 0.0), m2(n, 0.0), lsum(n, 0.0), fsum(n, 0.0), gsum(n, 0.0);
  double total = 0.0;
  for (const auto& c : chunks) {
    double nb = static_cast<double>(c.count), na = total, nt = na + nb;
    for (std::size_t i = 0; i < n; ++i) {
      double delta = c.mean[i] - mean[i];
      mean[i] += delta * nb / nt;
      m2[i] += c.m2[i] + delta * delta * na * nb / nt;
      lsum[i] += c.running[i];
      fsum[i] += c.interaction[i];
      gsum[i] += c.terminal[i];
    }
    total = nt;
  }
  est.runs = static_cast<std::size_t>(total);
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = est.players[i];
    p.mean = mean[i];
    p.se = total > 1.0 ? std::sqrt(m2[i] / (total - 1.0) / total) : 0.0;
    p.running = lsum[i] / total;
    p.interaction = fsum[i] / total;
    p.terminal = gsum[i] / total;
  }
  return est;
}

}  // namespace detail

/// Per-player Monte-Carlo estimates of J_i from a stored batch.
inline CostEstimates estimate_costs(const TrajectoryBatch& batch, const CostModel& cost,
                                    const InteractionSpec& running, const InteractionSpec& terminal,
                                    const PlayerLayout& layout, const PlayerFeedbacks& fb, const TimeGrid& grid) {
  require(batch.players == layout.size(), "estimate_costs: batch and layout disagree on N");
  RunCostEvaluator eval(cost, running, terminal, layout, fb, grid);
  const std::size_t n = layout.size(), chunks = (batch.runs + detail::kRunsPerChunk - 1) / detail::kRunsPerChunk;
  std::vector<detail::ChunkStats> stats(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    std::size_t lo = c * detail::kRunsPerChunk, hi = std::min(batch.runs, lo + detail::kRunsPerChunk);
    std::vector<CostComponents> runs((hi - lo) * n);
    for (std::size_t r = lo; r < hi; ++r)
      eval.evaluate(std::span<const Path>(batch.paths.data() + r * n, n),
                    std::span<CostComponents>(runs.data() + (r - lo) * n, n));
    stats[c] = detail::chunk_stats(runs, hi - lo, n);
  });
  return detail::combine(stats, n);
}

/// Same estimates as simulate + estimate_costs, without storing paths.
inline CostEstimates monte_carlo_costs(const SimConfig& config, const PlayerFeedbacks& fb,
                                       const InitialDistribution& m0, const TimeGrid& grid, const CostModel& cost,
                                       const InteractionSpec& running, const InteractionSpec& terminal) {
  config.validate();
  check_rates(fb, config.rate_cap);
  if (fb.policy().times() != grid.points()) throw GridMismatch("monte_carlo_costs: policy does not match time grid");
  const std::size_t n = fb.players(), d = fb.states();
  auto laws = initial_laws(config, fb, m0);
  RunCostEvaluator eval(cost, running, terminal, config.layout, fb, grid);
  const std::size_t chunks = (config.n_runs + detail::kRunsPerChunk - 1) / detail::kRunsPerChunk;
  std::vector<detail::ChunkStats> stats(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    std::size_t lo = c * detail::kRunsPerChunk, hi = std::min(config.n_runs, lo + detail::kRunsPerChunk);
    std::vector<CostComponents> runs((hi - lo) * n);
    std::vector<Path> paths(n);
    for (std::size_t r = lo; r < hi; ++r) {
      for (std::size_t i = 0; i < n; ++i) {
        auto rng = player_stream(config.seed, r, i);
        paths[i] = simulate_player(fb, i, std::span<const double>(laws.data() + i * d, d), grid, rng);
      }
      eval.evaluate(paths, std::span<CostComponents>(runs.data() + (r - lo) * n, n));
    }
    stats[c] = detail::chunk_stats(runs, hi - lo, n);
  });
  return detail::combine(stats, n);
}

}  // namespace lrmfg
