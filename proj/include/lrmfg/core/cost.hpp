#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrmfg/core/error.hpp"
#include "lrmfg/core/linalg.hpp"
#include "lrmfg/core/random.hpp"

namespace lrmfg {

/// u -> intercept + slope * u.
struct AffineProfile {
  double intercept = 1.0;
  double slope = 0.0;

  double operator()(double u) const noexcept { return intercept + slope * u; }
  double min_on_unit_interval() const noexcept { return std::min(intercept, intercept + slope); }
  friend bool operator==(const AffineProfile&, const AffineProfile&) = default;
};

/// c(x, u) = intercept[x] + slope[x] * u.
struct StatePotential {
  std::vector<double> intercept;
  std::vector<double> slope;

  static StatePotential zero(std::size_t d) { return {std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)}; }
  static StatePotential constant(std::vector<double> c) {
    std::vector<double> zeros(c.size(), 0.0);
    return {std::move(c), std::move(zeros)};
  }

  double operator()(std::size_t x, double u) const { return intercept[x] + slope[x] * u; }
  friend bool operator==(const StatePotential&, const StatePotential&) = default;
};

/// User-supplied running cost L(x, a, u) with its gradient in a.
struct CustomCost {
  std::function<double(std::size_t x, std::span<const double> a, double u)> value;
  std::function<void(std::size_t x, std::span<const double> a, double u, std::span<double> grad)> gradient;
  double gamma = 0.0;
  // Optional exact minimizer of sum_{y != x} a_y p_y + L(x, a, u); writes a.
  std::function<void(std::size_t x, std::span<const double> p, double u, std::span<double> a)> argmin;
};

/// Running cost L(x, a, u) of a player at position u in state x using rates a.
///
/// Three families:
///  - Quadratic: (theta(u)/2) sum_{y != x} a_y^2 + c(x, u), closed-form minimizer.
///  - Quartic:   quadratic + (kappa/4) sum_{y != x} a_y^4, solved by projected Newton.
///  - Custom:    user evaluators.
/// gamma is the strong-convexity constant of L in a.
class CostModel {
public:
  enum class Family { Quadratic, Quartic, Custom };

  static CostModel quadratic(std::size_t d, AffineProfile theta, StatePotential potential) {
    CostModel m(Family::Quadratic, d);
    m.theta_ = theta;
    m.potential_ = std::move(potential);
    m.validate_builtin();
    m.gamma_ = theta.min_on_unit_interval() / 2.0;
    return m;
  }

  static CostModel quadratic(std::size_t d, double theta) {
    return quadratic(d, AffineProfile{theta, 0.0}, StatePotential::zero(d));
  }

  static CostModel quartic(std::size_t d, AffineProfile theta, double kappa, StatePotential potential) {
    CostModel m(Family::Quartic, d);
    m.theta_ = theta;
    m.kappa_ = kappa;
    m.potential_ = std::move(potential);
    m.validate_builtin();
    require(std::isfinite(kappa) && kappa >= 0.0, "CostModel: kappa must be nonnegative");
    m.gamma_ = theta.min_on_unit_interval() / 2.0;
    return m;
  }

  static CostModel custom(std::size_t d, CustomCost cost) {
    require(static_cast<bool>(cost.value) && static_cast<bool>(cost.gradient),
            "CostModel: custom cost needs value and gradient evaluators");
    require(cost.gamma > 0.0, "CostModel: gamma must be positive");
    CostModel m(Family::Custom, d);
    m.gamma_ = cost.gamma;
    m.custom_ = std::move(cost);
    return m;
  }

  Family family() const noexcept { return family_; }
  std::size_t states() const noexcept { return d_; }
  double gamma() const noexcept { return gamma_; }
  const AffineProfile& theta() const noexcept { return theta_; }
  double kappa() const noexcept { return kappa_; }
  const StatePotential& potential() const noexcept { return potential_; }
  bool has_closed_form() const noexcept { return family_ == Family::Quadratic; }

  double theta_at(double u) const {
    double th = theta_(u);
    if (!(th > 0.0)) throw InvalidArgument("CostModel: theta(u) must be positive at u=" + std::to_string(u));
    return th;
  }

  /// L(x, a, u); a_x is ignored.
  double value(std::size_t x, std::span<const double> a, double u) const {
    if (family_ == Family::Custom) return custom_.value(x, a, u);
    double th = theta_at(u), quad = 0.0, quart = 0.0;
    for (std::size_t y = 0; y < d_; ++y) {
      if (y == x) continue;
      double a2 = a[y] * a[y];
      quad += a2;
      quart += a2 * a2;
    }
    return 0.5 * th * quad + 0.25 * kappa_ * quart + potential_(x, u);
  }

  /// grad_a L(x, a, u); the x entry is set to 0.
  void gradient(std::size_t x, std::span<const double> a, double u, std::span<double> out) const {
    if (family_ == Family::Custom) {
      custom_.gradient(x, a, u, out);
      out[x] = 0.0;
      return;
    }
    double th = theta_at(u);
    for (std::size_t y = 0; y < d_; ++y)
      out[y] = (y == x) ? 0.0 : th * a[y] + kappa_ * a[y] * a[y] * a[y];
  }

  const CustomCost& custom() const noexcept { return custom_; }

  friend bool operator==(const CostModel& a, const CostModel& b) {
    if (a.family_ == Family::Custom || b.family_ == Family::Custom) return false;
    return a.family_ == b.family_ && a.d_ == b.d_ && a.theta_ == b.theta_ &&
           a.kappa_ == b.kappa_ && a.potential_ == b.potential_;
  }

private:
  CostModel(Family f, std::size_t d) : family_(f), d_(d) {
    require(d >= 2, "CostModel: need at least two states");
  }

  void validate_builtin() const {
    require(theta_.min_on_unit_interval() > 0.0, "CostModel: theta must be positive on [0,1]");
    require(potential_.intercept.size() == d_ && potential_.slope.size() == d_,
            "CostModel: potential must have one entry per state");
    for (std::size_t x = 0; x < d_; ++x)
      require(std::isfinite(potential_.intercept[x]) && std::isfinite(potential_.slope[x]),
              "CostModel: potential must be finite");
  }

  Family family_;
  std::size_t d_;
  double gamma_ = 0.0;
  AffineProfile theta_{};
  double kappa_ = 0.0;
  StatePotential potential_;
  CustomCost custom_;
};

namespace detail {

inline double rate_objective(const CostModel& cost, std::size_t x, std::span<const double> p,
                             std::span<const double> a, double u) {
  double lin = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y)
    if (y != x) lin += a[y] * p[y];
  return lin + cost.value(x, a, u);
}

// Projected Newton with an Armijo backtracking search along the projection
// arc. The Hessian of L comes from central differences of the gradient.
inline void projected_newton(const CostModel& cost, std::size_t x, std::span<const double> p,
                             double u, std::span<double> a) {
  const std::size_t d = p.size();
  constexpr int kMaxIter = 200;
  double scale = 1.0;
  for (std::size_t y = 0; y < d; ++y)
    if (y != x) scale = std::max(scale, std::abs(p[y]));
  const double tol = 1e-10 * scale;

  std::vector<double> g(d), gp(d), gm(d), trial(d), dir(d), probe(d);
  std::fill(a.begin(), a.end(), 0.0);
  double residual = 0.0;

  auto full_gradient = [&](std::span<const double> at, std::span<double> out) {
    cost.gradient(x, at, u, out);
    for (std::size_t y = 0; y < d; ++y) out[y] = (y == x) ? 0.0 : out[y] + p[y];
  };

  for (int iter = 0; iter < kMaxIter; ++iter) {
    full_gradient(a, g);
    residual = 0.0;
    for (std::size_t y = 0; y < d; ++y) {
      if (y == x) continue;
      double r = a[y] > 0.0 ? g[y] : std::min(0.0, g[y]);
      residual = std::max(residual, std::abs(r));
    }
    if (residual <= tol) return;

    // Free variables: interior, or at the bound with a descent direction inward.
    std::vector<std::size_t> free;
    const double eps = std::min(1e-12, residual);
    for (std::size_t y = 0; y < d; ++y)
      if (y != x && !(a[y] <= eps && g[y] > 0.0)) free.push_back(y);

    std::fill(dir.begin(), dir.end(), 0.0);
    const std::size_t nf = free.size();
    bool newton_ok = nf > 0;
    if (newton_ok) {
      std::vector<double> h(nf * nf), rhs(nf);
      for (std::size_t j = 0; j < nf; ++j) {
        std::size_t z = free[j];
        double step = 1e-6 * std::max(1.0, std::abs(a[z]));
        std::copy(a.begin(), a.end(), probe.begin());
        probe[z] = a[z] + step;
        cost.gradient(x, probe, u, gp);
        probe[z] = a[z] - step;
        cost.gradient(x, probe, u, gm);
        for (std::size_t i = 0; i < nf; ++i)
          h[i * nf + j] = (gp[free[i]] - gm[free[i]]) / (2.0 * step);
      }
      for (std::size_t i = 0; i < nf; ++i) rhs[i] = -g[free[i]];
      newton_ok = linalg::solve_dense(h, rhs);
      if (newton_ok)
        for (std::size_t i = 0; i < nf; ++i) dir[free[i]] = rhs[i];
    }
    if (!newton_ok)
      for (std::size_t y = 0; y < d; ++y)
        if (y != x) dir[y] = -g[y];

    auto residual_at = [&](std::span<const double> at) {
      full_gradient(at, gp);
      double r = 0.0;
      for (std::size_t y = 0; y < d; ++y)
        if (y != x) r = std::max(r, std::abs(at[y] > 0.0 ? gp[y] : std::min(0.0, gp[y])));
      return r;
    };
    const double f0 = rate_objective(cost, x, p, a, u);
    double predicted = 0.0;
    for (std::size_t y = 0; y < d; ++y) {
      trial[y] = (y == x) ? 0.0 : std::max(0.0, a[y] + dir[y]);
      predicted += g[y] * (trial[y] - a[y]);
    }
    bool accepted = false;
    if (-predicted <= 1e-12 * (1.0 + std::abs(f0))) {
      // The objective decrease is at rounding level; judge the full
      // projected step by the optimality residual instead.
      accepted = residual_at(trial) < residual;
    } else {
      double step = 1.0;
      for (int ls = 0; ls < 60 && !accepted; ++ls, step *= 0.5) {
        double decrease = 0.0;
        for (std::size_t y = 0; y < d; ++y) {
          trial[y] = (y == x) ? 0.0 : std::max(0.0, a[y] + step * dir[y]);
          decrease += g[y] * (trial[y] - a[y]);
        }
        accepted = rate_objective(cost, x, p, trial, u) <= f0 + 1e-4 * decrease;
      }
    }
    if (!accepted) break;
    std::copy(trial.begin(), trial.end(), a.begin());
  }
  // Final convergence check with the last iterate.
  full_gradient(a, g);
  residual = 0.0;
  for (std::size_t y = 0; y < d; ++y) {
    if (y == x) continue;
    double r = a[y] > 0.0 ? g[y] : std::min(0.0, g[y]);
    residual = std::max(residual, std::abs(r));
  }
  if (residual <= tol) return;
  throw ArgminNotConverged(std::vector<double>(a.begin(), a.end()), residual);
}

}  // namespace detail

/// Unique minimizer of sum_{y != x} a_y p_y + L(x, a, u) over a >= 0, written
/// into `out` (length d, out[x] = 0). p_x is ignored.
inline void argmin_rates(const CostModel& cost, std::size_t x, std::span<const double> p, double u,
                         std::span<double> out) {
  const std::size_t d = cost.states();
  require(p.size() == d && out.size() == d, "argmin_rates: p must have one entry per state");
  require(x < d, "argmin_rates: state out of range");
  for (std::size_t y = 0; y < d; ++y)
    if (y != x) require(std::isfinite(p[y]), "argmin_rates: p must be finite");

  switch (cost.family()) {
    case CostModel::Family::Quadratic: {
      double th = cost.theta_at(u);
      for (std::size_t y = 0; y < d; ++y) out[y] = (y == x) ? 0.0 : std::max(0.0, -p[y] / th);
      return;
    }
    case CostModel::Family::Custom:
      if (cost.custom().argmin) {
        cost.custom().argmin(x, p, u, out);
        out[x] = 0.0;
        return;
      }
      [[fallthrough]];
    case CostModel::Family::Quartic:
      detail::projected_newton(cost, x, p, u, out);
      return;
  }
}

inline std::vector<double> argmin_rates(const CostModel& cost, std::size_t x,
                                        std::span<const double> p, double u) {
  std::vector<double> a(cost.states(), 0.0);
  argmin_rates(cost, x, p, u, a);
  return a;
}

/// H(x, p, u) = -inf_a [sum_{y != x} a_y p_y + L(x, a, u)]. If `rates` is
/// given it receives the minimizer.
inline double hamiltonian(const CostModel& cost, std::size_t x, std::span<const double> p, double u,
                          std::span<double> rates = {}) {
  const std::size_t d = cost.states();
  if (cost.family() == CostModel::Family::Quadratic) {
    require(p.size() == d && x < d, "hamiltonian: bad arguments");
    double th = cost.theta_at(u), h = 0.0;
    for (std::size_t y = 0; y < d; ++y) {
      if (y == x) continue;
      require(std::isfinite(p[y]), "hamiltonian: p must be finite");
      double neg = std::min(0.0, p[y]);
      h += neg * neg;
      if (!rates.empty()) rates[y] = -neg / th;
    }
    if (!rates.empty()) rates[x] = 0.0;
    return h / (2.0 * th) - cost.potential()(x, u);
  }
  std::vector<double> local;
  std::span<double> a = rates;
  if (a.empty()) {
    local.assign(d, 0.0);
    a = local;
  }
  argmin_rates(cost, x, p, u, a);
  return -detail::rate_objective(cost, x, p, a, u);
}

/// Largest relative mismatch between grad_a L and central differences of L
/// over random probes a in [0, a_max]^d, u in [0, 1].
inline double gradient_check(const CostModel& cost, std::size_t probes, std::uint64_t seed,
                             double a_max = 3.0) {
  const std::size_t d = cost.states();
  CounterRng rng(seed, 0x67726164);
  std::vector<double> a(d), g(d), shifted(d);
  double worst = 0.0;
  for (std::size_t n = 0; n < probes; ++n) {
    std::size_t x = static_cast<std::size_t>(rng.uniform() * static_cast<double>(d)) % d;
    double u = rng.uniform();
    for (auto& v : a) v = a_max * rng.uniform();
    a[x] = 0.0;
    cost.gradient(x, a, u, g);
    for (std::size_t y = 0; y < d; ++y) {
      if (y == x) continue;
      double h = 1e-5 * std::max(1.0, a[y]);
      shifted = a;
      shifted[y] = a[y] + h;
      double up = cost.value(x, shifted, u);
      shifted[y] = a[y] - h;
      double down = cost.value(x, shifted, u);
      double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - g[y]) / std::max(1.0, std::abs(g[y])));
    }
  }
  return worst;
}

}  // namespace lrmfg
