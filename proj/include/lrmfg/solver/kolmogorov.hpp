#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "lrmfg/core/linalg.hpp"
#include "lrmfg/core/parallel.hpp"
#include "lrmfg/solver/hjb.hpp"

namespace lrmfg {

/// Initial per-cell distributions m_{x,0}(u_c), cell-major.
using InitialDistribution = std::vector<double>;

inline InitialDistribution uniform_initial(std::size_t cells, std::size_t d) {
  return InitialDistribution(cells * d, 1.0 / static_cast<double>(d));
}

inline void validate_initial(const InitialDistribution& m0, std::size_t cells, std::size_t d) {
  require(m0.size() == cells * d, "initial distribution must have cells * states entries");
  for (std::size_t c = 0; c < cells; ++c) {
    double s = 0.0;
    for (std::size_t x = 0; x < d; ++x) {
      double v = m0[c * d + x];
      require(std::isfinite(v) && v >= 0.0, "initial distribution must be nonnegative");
      s += v;
    }
    require(std::abs(s - 1.0) <= 1e-9, "initial distribution of cell " + std::to_string(c) + " must sum to 1");
  }
}

/// Integrates dm_x/dt = sum_y m_y alpha(y -> x) - m_x sum_y alpha(x -> y)
/// per cell, with the rates of slab k held constant on [t_k, t_{k+1}).
inline MeasureFlow solve_kolmogorov_forward(const Policy& policy, const InitialDistribution& m0,
                                            const TimeGrid& grid, Integrator integrator = Integrator::RK4) {
  const std::size_t d = policy.states(), m = policy.cells(), points = grid.points();
  if (policy.times() != points) throw GridMismatch("solve_kolmogorov_forward: policy does not match time grid");
  validate_initial(m0, m, d);
  for (double r : policy.data())
    require(std::isfinite(r) && r >= 0.0, "solve_kolmogorov_forward: rates must be finite and nonnegative");

  MeasureFlow flow(points, m, d);
  const double dt = grid.dt();
  parallel_for(m, [&](std::size_t c) {
    std::vector<double> cur(m0.begin() + static_cast<std::ptrdiff_t>(c * d),
                            m0.begin() + static_cast<std::ptrdiff_t>((c + 1) * d));
    std::vector<double> q(d * d), k1(d), k2(d), k3(d), k4(d), stage(d);
    std::copy(cur.begin(), cur.end(), flow.at(0, c).begin());
    auto apply = [&](std::span<const double> row, std::span<double> out) {
      for (std::size_t x = 0; x < d; ++x) {
        double s = 0.0;
        for (std::size_t y = 0; y < d; ++y) s += row[y] * q[y * d + x];
        out[x] = s;
      }
    };
    for (std::size_t k = 0; k < grid.steps(); ++k) {
      for (std::size_t x = 0; x < d; ++x) {
        double out = 0.0;
        for (std::size_t y = 0; y < d; ++y) {
          q[x * d + y] = (y == x) ? 0.0 : policy(k, c, x, y);
          if (y != x) out += q[x * d + y];
        }
        q[x * d + x] = -out;
      }
      if (integrator == Integrator::RK4) {
        apply(cur, k1);
        for (std::size_t x = 0; x < d; ++x) stage[x] = cur[x] + 0.5 * dt * k1[x];
        apply(stage, k2);
        for (std::size_t x = 0; x < d; ++x) stage[x] = cur[x] + 0.5 * dt * k2[x];
        apply(stage, k3);
        for (std::size_t x = 0; x < d; ++x) stage[x] = cur[x] + dt * k3[x];
        apply(stage, k4);
        for (std::size_t x = 0; x < d; ++x) cur[x] += dt / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
      } else {
        // (I - dt Q)^T m_next = m
        std::vector<double> a(d * d);
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < d; ++j) a[i * d + j] = (i == j ? 1.0 : 0.0) - dt * q[j * d + i];
        if (!linalg::solve_dense(std::move(a), cur))
          throw IntegrationError("Kolmogorov: singular implicit step", k + 1, c);
      }
      double sum = 0.0, low = 0.0;
      for (double v : cur) {
        if (!std::isfinite(v)) throw IntegrationError("Kolmogorov: non-finite mass", k + 1, c);
        sum += v;
        low = std::min(low, v);
      }
      if (std::abs(sum - 1.0) > 1e-6 || low < -1e-6)
        throw SimplexViolation("Kolmogorov: left the simplex (reduce dt)", k + 1, c);
      if (low < 0.0) {
        // Project the small excursion back onto the simplex.
        double s = 0.0;
        for (auto& v : cur) s += (v = std::max(0.0, v));
        for (auto& v : cur) v /= s;
      }
      std::copy(cur.begin(), cur.end(), flow.at(k + 1, c).begin());
    }
  });
  return flow;
}

}  // namespace lrmfg
