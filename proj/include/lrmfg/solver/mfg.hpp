#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lrmfg/core/measure.hpp"
#include "lrmfg/core/random.hpp"
#include "lrmfg/solver/hjb.hpp"
#include "lrmfg/solver/kolmogorov.hpp"

namespace lrmfg {

enum class PicardScheme {
  Damped,         // m <- (1 - damping) m + damping Phi(m)
  FictitiousPlay  // damping 1/k at iteration k
};

struct SolverConfig {
  double damping = 0.5;
  double tolerance = 1e-6;
  std::size_t max_iterations = 200;
  Integrator integrator = Integrator::RK4;
  PicardScheme scheme = PicardScheme::Damped;
  double rate_cap = 1e3;
  /// Starting flow; m0 frozen in time when empty.
  std::optional<MeasureFlow> initial_flow;

  void validate() const {
    require(damping > 0.0 && damping <= 1.0, "SolverConfig: damping must lie in (0, 1]");
    require(tolerance > 0.0, "SolverConfig: tolerance must be positive");
    require(max_iterations >= 1, "SolverConfig: max_iterations must be at least 1");
    require(rate_cap > 0.0, "SolverConfig: rate cap must be positive");
  }
};

/// The ingredients of one application of the best-response map.
struct BestResponse {
  ValueField value;
  Policy policy;
  MeasureFlow flow;  // law generated by `policy`
  std::size_t capped_rates = 0;
};

struct EquilibriumResult {
  ValueField value;          // HJB solution against `flow`
  MeasureFlow flow;          // final Picard iterate
  MeasureFlow induced_flow;  // Kolmogorov flow of `policy`; within tolerance of `flow` when converged
  Policy policy;             // optimal feedback for `value`
  std::vector<double> residual_history;
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t capped_rates = 0;
  std::vector<std::string> warnings;
};

/// m frozen at m0 for every grid time.
inline MeasureFlow frozen_flow(const InitialDistribution& m0, const Discretization& disc) {
  MeasureFlow f(disc.time.points(), disc.cells(), disc.d());
  for (std::size_t k = 0; k < f.times(); ++k)
    for (std::size_t c = 0; c < f.cells(); ++c)
      for (std::size_t x = 0; x < f.states(); ++x) f(k, c, x) = m0[c * f.states() + x];
  return f;
}

/// Uniform (flat Dirichlet) point on the simplex.
inline void dirichlet_point(CounterRng& rng, std::span<double> out) {
  double s = 0.0;
  for (auto& v : out) s += (v = rng.exponential());
  for (auto& v : out) v /= s;
}

/// Random flow: per cell, a linear interpolation in time between two
/// independent Dirichlet points.
inline MeasureFlow random_flow(const Discretization& disc, std::uint64_t seed) {
  const std::size_t d = disc.d();
  MeasureFlow f(disc.time.points(), disc.cells(), d);
  CounterRng rng(seed, 0x666c6f77);
  std::vector<double> a(d), b(d);
  for (std::size_t c = 0; c < disc.cells(); ++c) {
    dirichlet_point(rng, a);
    dirichlet_point(rng, b);
    for (std::size_t k = 0; k < f.times(); ++k) {
      double w = static_cast<double>(k) / static_cast<double>(f.times() - 1);
      for (std::size_t x = 0; x < d; ++x) f(k, c, x) = (1.0 - w) * a[x] + w * b[x];
    }
  }
  return f;
}

/// Phi(m): best response to m and the law it generates from m0.
inline BestResponse best_response_map(const CostModel& cost, const InteractionSpec& running,
                                      const InteractionSpec& terminal, const InitialDistribution& m0,
                                      const MeasureFlow& flow, const Discretization& disc,
                                      const SolverConfig& config) {
  BestResponse br;
  br.value = solve_hjb_backward(cost, running, terminal, flow, disc, config.integrator);
  br.policy = policy_from_value(cost, br.value, disc.atlas, config.rate_cap, &br.capped_rates);
  br.flow = solve_kolmogorov_forward(br.policy, m0, disc.time, config.integrator);
  return br;
}

/// Damped Picard iteration on the MFG fixed point m = Phi(m).
///
/// Iteration k forms m_k from m_{k-1} and Phi(m_{k-1}), then evaluates
/// Phi(m_k) and records flow_distance(m_k, Phi(m_k)). When neither F nor G
/// depends on the measure, Phi is constant and the first step is taken
/// undamped, so the exact fixed point is reached in one iteration.
/// Non-convergence is reported through `converged`, not thrown.
inline EquilibriumResult solve_mfg(const CostModel& cost, const InteractionSpec& running,
                                   const InteractionSpec& terminal, const InitialDistribution& m0,
                                   const Discretization& disc, const SolverConfig& config = {}) {
  config.validate();
  validate_initial(m0, disc.cells(), disc.d());
  validate(running, disc.d(), &disc.atlas);
  validate(terminal, disc.d(), &disc.atlas);

  MeasureFlow current = config.initial_flow ? *config.initial_flow : frozen_flow(m0, disc);
  if (!is_on_simplex(current, 1e-8, 1e-9)) throw InvalidArgument("solve_mfg: initial flow must lie on the simplex");
  const bool decoupled = is_zero(running) && is_zero(terminal);

  EquilibriumResult res;
  BestResponse br = best_response_map(cost, running, terminal, m0, current, disc, config);
  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    double lambda = config.scheme == PicardScheme::FictitiousPlay ? 1.0 / static_cast<double>(it) : config.damping;
    if (decoupled && it == 1) lambda = 1.0;
    if (lambda == 1.0) {
      current = br.flow;
    } else {
      auto& cd = current.data();
      const auto& nd = br.flow.data();
      for (std::size_t i = 0; i < cd.size(); ++i) cd[i] = (1.0 - lambda) * cd[i] + lambda * nd[i];
    }
    br = best_response_map(cost, running, terminal, m0, current, disc, config);
    double r = flow_distance(current, br.flow, disc.atlas);
    res.residual_history.push_back(r);
    res.iterations = it;
    if (r <= config.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.value = std::move(br.value);
  res.policy = std::move(br.policy);
  res.induced_flow = std::move(br.flow);
  res.flow = std::move(current);
  res.capped_rates = br.capped_rates;
  if (res.capped_rates > 0)
    res.warnings.push_back("rate cap hit on " + std::to_string(res.capped_rates) +
                           " policy entries; the capped policy is outside the model class");
  if (!res.converged)
    res.warnings.push_back("Picard iteration did not reach tolerance within max_iterations");
  return res;
}

}  // namespace lrmfg
