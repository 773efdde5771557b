#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "lrmfg/core/cost.hpp"
#include "lrmfg/core/interaction.hpp"
#include "lrmfg/core/linalg.hpp"
#include "lrmfg/core/parallel.hpp"
#include "lrmfg/core/types.hpp"

namespace lrmfg {

enum class Integrator { RK4, ImplicitEuler };

/// The shared discretization of a long-range game.
struct Discretization {
  StateSpace states;
  TimeGrid time;
  PositionAtlas atlas;

  std::size_t d() const noexcept { return states.size(); }
  std::size_t cells() const noexcept { return atlas.size(); }
};

namespace detail {

// dV_x/ds = F_x - H(x, grad V(x), u) in reversed time s = T - t.
inline void hjb_rhs(const CostModel& cost, double u, std::span<const double> v,
                    std::span<const double> source, std::span<double> out, std::vector<double>& grad) {
  const std::size_t d = v.size();
  for (std::size_t x = 0; x < d; ++x) {
    for (std::size_t y = 0; y < d; ++y) grad[y] = v[y] - v[x];
    out[x] = source[x] - hamiltonian(cost, x, grad, u);
  }
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

}  // namespace detail

/// Integrates one cell's HJB system backward on `grid`.
///
/// `source` holds F(x, m(t_k), u) for k = 0..n_steps (time-major, d per
/// point); `terminal` is G(x, m(T), u). Returns V time-major. RK4 stages at
/// slab midpoints use the mean of the two neighbouring source values.
inline std::vector<double> solve_hjb_cell(const CostModel& cost, double u, std::span<const double> source,
                                          std::span<const double> terminal, const TimeGrid& grid,
                                          Integrator integrator = Integrator::RK4, std::size_t cell = 0) {
  const std::size_t d = terminal.size(), n = grid.steps();
  require(source.size() == grid.points() * d, "solve_hjb_cell: source must cover every grid point");
  const double dt = grid.dt();
  std::vector<double> v(grid.points() * d);
  std::copy(terminal.begin(), terminal.end(), v.begin() + static_cast<std::ptrdiff_t>(n * d));

  std::vector<double> grad(d), k1(d), k2(d), k3(d), k4(d), stage(d), mid(d), rates(d);
  for (std::size_t k = n; k-- > 0;) {
    std::span<const double> next(v.data() + (k + 1) * d, d);
    std::span<const double> src_next(source.data() + (k + 1) * d, d);
    std::span<const double> src_now(source.data() + k * d, d);
    std::span<double> now(v.data() + k * d, d);

    auto finite_or_throw = [&](std::span<const double> s) {
      if (!detail::all_finite(s)) throw IntegrationError("HJB: non-finite value", k, cell);
    };
    if (integrator == Integrator::RK4) {
      for (std::size_t x = 0; x < d; ++x) mid[x] = 0.5 * (src_now[x] + src_next[x]);
      detail::hjb_rhs(cost, u, next, src_next, k1, grad);
      finite_or_throw(k1);
      for (std::size_t x = 0; x < d; ++x) stage[x] = next[x] + 0.5 * dt * k1[x];
      detail::hjb_rhs(cost, u, stage, mid, k2, grad);
      finite_or_throw(k2);
      for (std::size_t x = 0; x < d; ++x) stage[x] = next[x] + 0.5 * dt * k2[x];
      detail::hjb_rhs(cost, u, stage, mid, k3, grad);
      finite_or_throw(k3);
      for (std::size_t x = 0; x < d; ++x) stage[x] = next[x] + dt * k3[x];
      detail::hjb_rhs(cost, u, stage, src_now, k4, grad);
      for (std::size_t x = 0; x < d; ++x)
        now[x] = next[x] + dt / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
    } else {
      // Newton on V - V_next - dt (F - H(grad V)) = 0. The Jacobian is
      // I - dt Q(V), with Q the generator of the minimizing rates.
      std::copy(next.begin(), next.end(), now.begin());
      std::vector<double> resid(d), jac(d * d);
      for (int it = 0; it < 100; ++it) {
        std::fill(jac.begin(), jac.end(), 0.0);
        double worst = 0.0;
        for (std::size_t x = 0; x < d; ++x) {
          for (std::size_t y = 0; y < d; ++y) grad[y] = now[y] - now[x];
          double h = hamiltonian(cost, x, grad, u, rates);
          if (!std::isfinite(h)) throw IntegrationError("HJB: non-finite value", k, cell);
          resid[x] = now[x] - next[x] - dt * (src_now[x] - h);
          worst = std::max(worst, std::abs(resid[x]));
          double out = 0.0;
          for (std::size_t y = 0; y < d; ++y) {
            if (y == x) continue;
            jac[x * d + y] = -dt * rates[y];
            out += rates[y];
          }
          jac[x * d + x] = 1.0 + dt * out;
        }
        double scale = 1.0;
        for (double e : now) scale = std::max(scale, std::abs(e));
        if (worst <= 1e-14 * scale) break;
        for (auto& r : resid) r = -r;
        if (!linalg::solve_dense(jac, resid)) throw IntegrationError("HJB: singular Newton system", k, cell);
        for (std::size_t x = 0; x < d; ++x) now[x] += resid[x];
      }
    }
    finite_or_throw(now);
  }
  return v;
}

/// Per-cell sources F(x, m(t_k), u_c), time-major then cell-major.
inline std::vector<double> source_table(const InteractionSpec& spec, const MeasureFlow& flow,
                                        const PositionAtlas& atlas, std::size_t first, std::size_t count) {
  const std::size_t d = flow.states(), m = flow.cells();
  std::vector<double> out(count * m * d);
  for (std::size_t k = 0; k < count; ++k) {
    CellMeasure slice{flow.slice(first + k), d, &atlas};
    auto table = interaction_table(spec, slice);
    std::copy(table.begin(), table.end(), out.begin() + static_cast<std::ptrdiff_t>(k * m * d));
  }
  return out;
}

/// Solves -dV/dt + H(x, grad V, u) = F(x, m(t), u), V(T) = G(x, m(T), u)
/// independently on every atlas cell.
inline ValueField solve_hjb_backward(const CostModel& cost, const InteractionSpec& running,
                                     const InteractionSpec& terminal, const MeasureFlow& flow,
                                     const Discretization& disc, Integrator integrator = Integrator::RK4) {
  const std::size_t d = disc.d(), m = disc.cells(), points = disc.time.points();
  if (flow.times() != points || flow.cells() != m || flow.states() != d)
    throw GridMismatch("solve_hjb_backward: flow does not match the discretization");
  require(cost.states() == d, "solve_hjb_backward: cost has wrong number of states");

  auto src = source_table(running, flow, disc.atlas, 0, points);
  auto term = source_table(terminal, flow, disc.atlas, points - 1, 1);

  ValueField v(points, m, d);
  parallel_for(m, [&](std::size_t c) {
    std::vector<double> cell_src(points * d);
    for (std::size_t k = 0; k < points; ++k)
      for (std::size_t x = 0; x < d; ++x) cell_src[k * d + x] = src[(k * m + c) * d + x];
    std::span<const double> cell_term(term.data() + c * d, d);
    auto col = solve_hjb_cell(cost, disc.atlas.cell(c), cell_src, cell_term, disc.time, integrator, c);
    for (std::size_t k = 0; k < points; ++k)
      for (std::size_t x = 0; x < d; ++x) v(k, c, x) = col[k * d + x];
  });
  return v;
}

/// alpha(t, x -> y, u) = a*_y(x, grad V(t, x, u), u), clipped at rate_cap.
/// If `capped` is given it receives the number of clipped entries.
inline Policy policy_from_value(const CostModel& cost, const ValueField& v, const PositionAtlas& atlas,
                                double rate_cap = 1e3, std::size_t* capped = nullptr) {
  require(v.cells() == atlas.size(), "policy_from_value: atlas does not match value field");
  require(rate_cap > 0.0, "policy_from_value: rate cap must be positive");
  const std::size_t d = v.states();
  Policy pol(v.times(), v.cells(), d);
  std::vector<double> grad(d), a(d);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < v.times(); ++k)
    for (std::size_t c = 0; c < v.cells(); ++c) {
      auto row = v.at(k, c);
      for (std::size_t x = 0; x < d; ++x) {
        for (std::size_t y = 0; y < d; ++y) grad[y] = row[y] - row[x];
        argmin_rates(cost, x, grad, atlas.cell(c), a);
        auto out = pol.row(k, c, x);
        for (std::size_t y = 0; y < d; ++y) {
          double r = (y == x) ? 0.0 : a[y];
          if (r > rate_cap) {
            r = rate_cap;
            ++hits;
          }
          out[y] = r;
        }
      }
    }
  if (capped) *capped = hits;
  return pol;
}

}  // namespace lrmfg
