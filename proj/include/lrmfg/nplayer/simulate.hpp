#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lrmfg/core/cost.hpp"
#include "lrmfg/core/random.hpp"
#include "lrmfg/core/types.hpp"
#include "lrmfg/solver/hjb.hpp"
#include "lrmfg/solver/kolmogorov.hpp"

namespace lrmfg {

/// Equilibrium feedback alpha^{N,i}(t, x) = alpha*(t, x, u_i) per player,
/// looked up at the atlas cell nearest to each player's position.
class PlayerFeedbacks {
public:
  PlayerFeedbacks(Policy policy, const PositionAtlas& atlas, const PlayerLayout& layout)
      : policy_(std::move(policy)) {
    if (atlas.size() == 0 || policy_.cells() == 0) throw InvalidArgument("build_player_feedback: empty atlas");
    if (policy_.cells() != atlas.size()) throw GridMismatch("build_player_feedback: policy does not match atlas");
    cells_.reserve(layout.size());
    for (double u : layout.positions()) cells_.push_back(atlas.nearest(u));
  }

  std::size_t players() const noexcept { return cells_.size(); }
  std::size_t states() const noexcept { return policy_.states(); }
  std::size_t cell(std::size_t player) const { return cells_.at(player); }
  const Policy& policy() const noexcept { return policy_; }

  /// Rates out of state x on slab k for player i.
  std::span<const double> rates(std::size_t player, std::size_t k, std::size_t x) const {
    return policy_.row(k, cells_[player], x);
  }
  double exit_rate(std::size_t player, std::size_t k, std::size_t x) const {
    return policy_.exit_rate(k, cells_[player], x);
  }

private:
  Policy policy_;
  std::vector<std::size_t> cells_;
};

inline PlayerFeedbacks build_player_feedback(const Policy& policy, const PositionAtlas& atlas,
                                             const PlayerLayout& layout) {
  return PlayerFeedbacks(policy, atlas, layout);
}

inline PlayerFeedbacks build_player_feedback(const CostModel& cost, const ValueField& value,
                                             const PositionAtlas& atlas, const PlayerLayout& layout,
                                             double rate_cap = 1e3) {
  return PlayerFeedbacks(policy_from_value(cost, value, atlas, rate_cap), atlas, layout);
}

struct SimConfig {
  PlayerLayout layout;
  std::size_t n_runs = 1000;
  std::uint64_t seed = 0;
  /// Per-player initial laws (player-major, d each). Empty: m0 at the
  /// player's nearest cell.
  std::vector<double> initial{};
  double rate_cap = 1e3;

  void validate() const { require(n_runs >= 1, "SimConfig: n_runs must be at least 1"); }
};

/// Per-player initial laws: explicit ones from the config or m0 at the
/// nearest atlas cell.
inline std::vector<double> initial_laws(const SimConfig& config, const PlayerFeedbacks& fb,
                                        const InitialDistribution& m0) {
  const std::size_t n = fb.players(), d = fb.states();
  if (!config.initial.empty()) {
    require(config.initial.size() == n * d, "SimConfig: initial laws must have players * states entries");
    validate_initial(config.initial, n, d);
    return config.initial;
  }
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t x = 0; x < d; ++x) out[i * d + x] = m0.at(fb.cell(i) * d + x);
  return out;
}

struct Jump {
  double time;
  std::size_t state;
  friend bool operator==(const Jump&, const Jump&) = default;
};

struct Path {
  std::size_t initial_state = 0;
  std::vector<Jump> jumps;  // strictly increasing times in (0, T]
  friend bool operator==(const Path&, const Path&) = default;

  std::size_t state_at(double t) const noexcept {
    std::size_t s = initial_state;
    for (const auto& j : jumps) {
      if (j.time > t) break;
      s = j.state;
    }
    return s;
  }
  std::size_t final_state() const noexcept { return jumps.empty() ? initial_state : jumps.back().state; }
};

/// Simulated paths, run-major: path(run, player).
struct TrajectoryBatch {
  std::size_t runs = 0, players = 0, states = 0;
  double horizon = 0.0;
  std::vector<Path> paths;

  const Path& path(std::size_t run, std::size_t player) const { return paths[run * players + player]; }
  friend bool operator==(const TrajectoryBatch&, const TrajectoryBatch&) = default;
};

inline std::size_t sample_categorical(CounterRng& rng, std::span<const double> weights, double total) {
  double u = rng.uniform() * total, acc = 0.0;
  std::size_t last = 0;
  for (std::size_t y = 0; y < weights.size(); ++y) {
    if (weights[y] <= 0.0) continue;
    last = y;
    acc += weights[y];
    if (u < acc) return y;
  }
  return last;
}

/// One player's path on one run. Within slab [t_k, t_{k+1}) the exit rate
/// is constant, so exponential clocks redrawn at slab boundaries give an
/// exact sample of the piecewise-constant-rate chain.
inline Path simulate_player(const PlayerFeedbacks& fb, std::size_t player, std::span<const double> initial_law,
                            const TimeGrid& grid, CounterRng& rng) {
  Path path;
  path.initial_state = sample_categorical(rng, initial_law, 1.0);
  std::size_t x = path.initial_state;
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double end = grid.time(k + 1);
    double t = grid.time(k);
    for (;;) {
      double rate = fb.exit_rate(player, k, x);
      if (!(rate > 0.0)) break;
      t += rng.exponential() / rate;
      if (t >= end) break;
      x = sample_categorical(rng, fb.rates(player, k, x), rate);
      path.jumps.push_back({t, x});
    }
  }
  return path;
}

inline void check_rates(const PlayerFeedbacks& fb, double rate_cap) {
  for (double r : fb.policy().data())
    if (!(r >= 0.0 && r <= rate_cap))
      throw InvalidArgument("simulate: rate " + std::to_string(r) + " outside [0, rate cap]");
}

/// Stream of (seed, run, player); shared by simulate and the cost estimators.
inline CounterRng player_stream(std::uint64_t seed, std::size_t run, std::size_t player) {
  return CounterRng(seed, run, player);
}

inline TrajectoryBatch simulate(const SimConfig& config, const PlayerFeedbacks& fb, const InitialDistribution& m0,
                                const TimeGrid& grid) {
  config.validate();
  check_rates(fb, config.rate_cap);
  if (fb.policy().times() != grid.points()) throw GridMismatch("simulate: policy does not match time grid");
  const std::size_t n = fb.players(), d = fb.states();
  require(config.layout.size() == n, "simulate: layout and feedbacks disagree on N");
  auto laws = initial_laws(config, fb, m0);
  TrajectoryBatch batch{config.n_runs, n, d, grid.horizon(), std::vector<Path>(config.n_runs * n)};
  parallel_for(config.n_runs, [&](std::size_t r) {
    for (std::size_t i = 0; i < n; ++i) {
      auto rng = player_stream(config.seed, r, i);
      batch.paths[r * n + i] = simulate_player(fb, i, std::span<const double>(laws.data() + i * d, d), grid, rng);
    }
  });
  return batch;
}

}  // namespace lrmfg
