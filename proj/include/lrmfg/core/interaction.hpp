#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lrmfg/core/error.hpp"
#include "lrmfg/core/kernel.hpp"
#include "lrmfg/core/types.hpp"

namespace lrmfg {

/// Row-major d x d real matrix indexed by states.
struct StateMatrix {
  std::size_t d = 0;
  std::vector<double> v;

  StateMatrix() = default;
  StateMatrix(std::size_t n, std::vector<double> values) : d(n), v(std::move(values)) {
    require(v.size() == d * d, "StateMatrix: expected d*d entries");
    for (double e : v) require(std::isfinite(e), "StateMatrix: entries must be finite");
  }
  static StateMatrix identity(std::size_t n, double scale = 1.0) {
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = scale;
    return {n, std::move(v)};
  }
  static StateMatrix filled(std::size_t n, double value) { return {n, std::vector<double>(n * n, value)}; }

  double operator()(std::size_t x, std::size_t y) const { return v[x * d + y]; }
  double max_abs() const {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
  }
  friend bool operator==(const StateMatrix&, const StateMatrix&) = default;
};

namespace interaction {

struct Zero {
  friend bool operator==(const Zero&, const Zero&) = default;
};

/// F(x, m, u) = integral K(u, v) f(x, y) m(dv, dy).
struct TwoBody {
  Kernel kernel;
  StateMatrix f;
  friend bool operator==(const TwoBody&, const TwoBody&) = default;
};

/// F(x, m, u) = integral K(u, v) f(x, m^phi(v)) mu(dv), where m^phi is the
/// phi-weighted local average of the state distribution and
/// f(x, q) = sum_y linear(x, y) q_y + sum_y quadratic(x, y) q_y^2.
struct LowRes {
  Kernel kernel;
  StateMatrix linear;
  StateMatrix quadratic;
  Smoothing smoothing;
  friend bool operator==(const LowRes&, const LowRes&) = default;
};

/// F(x, m, u) = sum_y f(x, y) m_y(u): depends only on the distribution at the
/// player's own cell. Defined on cell densities only.
struct Local {
  StateMatrix f;
  friend bool operator==(const Local&, const Local&) = default;
};

}  // namespace interaction

using InteractionSpec =
    std::variant<interaction::Zero, interaction::TwoBody, interaction::LowRes, interaction::Local>;

inline bool is_zero(const InteractionSpec& s) { return std::holds_alternative<interaction::Zero>(s); }

/// Whether F(x, ., u) is affine in the measure (so it commutes with
/// expectations over independent opponents).
inline bool is_linear_in_measure(const InteractionSpec& s) {
  return !std::holds_alternative<interaction::LowRes>(s);
}

inline const char* kind_name(const InteractionSpec& s) {
  switch (s.index()) {
    case 0: return "zero";
    case 1: return "two_body";
    case 2: return "low_res";
    default: return "local";
  }
}

/// Checks sizes, boundedness and positivity of phi on atlas pairs.
inline void validate(const InteractionSpec& spec, std::size_t d, const PositionAtlas* atlas = nullptr) {
  using namespace interaction;
  if (auto* tb = std::get_if<TwoBody>(&spec)) {
    require(tb->f.d == d, "TwoBody: f must be d x d");
    require(std::isfinite(tb->kernel.bound()), "TwoBody: kernel must be bounded");
  } else if (auto* lr = std::get_if<LowRes>(&spec)) {
    require(lr->linear.d == d && lr->quadratic.d == d, "LowRes: f coefficients must be d x d");
    if (atlas)
      for (double v : atlas->cells())
        for (double w : atlas->cells())
          require(lr->smoothing(v, w) > 0.0, "LowRes: smoothing must be positive");
  } else if (auto* lo = std::get_if<Local>(&spec)) {
    require(lo->f.d == d, "Local: f must be d x d");
  }
}

namespace detail {

inline double lowres_f(const interaction::LowRes& lr, std::size_t x, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t y = 0; y < q.size(); ++y) s += lr.linear(x, y) * q[y] + lr.quadratic(x, y) * q[y] * q[y];
  return s;
}

inline void check_denominator(double den) {
  if (!(den >= 1e-14))
    throw InvalidArgument("LowRes: smoothing denominator below 1e-14 (phi must be positive)");
}

}  // namespace detail

/// F(x, m, u) for a finitely supported m (e.g. an empirical measure).
inline double eval_interaction(const InteractionSpec& spec, std::size_t x, const DiscreteMeasure& m,
                               double u) {
  using namespace interaction;
  if (std::holds_alternative<Zero>(spec)) return 0.0;
  if (auto* tb = std::get_if<TwoBody>(&spec)) {
    double s = 0.0;
    for (const auto& a : m.atoms()) s += tb->kernel(u, a.position) * tb->f(x, a.state) * a.mass;
    return s;
  }
  if (auto* lr = std::get_if<LowRes>(&spec)) {
    // Group atoms by position: the position marginal plays the role of mu.
    const std::size_t d = lr->linear.d;
    std::vector<double> pos;
    pos.reserve(m.size());
    for (const auto& a : m.atoms()) pos.push_back(a.position);
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    std::vector<double> mass(pos.size(), 0.0), joint(pos.size() * d, 0.0);
    for (const auto& a : m.atoms()) {
      auto k = static_cast<std::size_t>(std::lower_bound(pos.begin(), pos.end(), a.position) - pos.begin());
      mass[k] += a.mass;
      joint[k * d + a.state] += a.mass;
    }
    std::vector<double> q(d);
    double s = 0.0;
    for (std::size_t v = 0; v < pos.size(); ++v) {
      if (mass[v] == 0.0) continue;
      std::fill(q.begin(), q.end(), 0.0);
      double den = 0.0;
      for (std::size_t w = 0; w < pos.size(); ++w) {
        double phi = lr->smoothing(pos[v], pos[w]);
        den += phi * mass[w];
        for (std::size_t y = 0; y < d; ++y) q[y] += phi * joint[w * d + y];
      }
      detail::check_denominator(den);
      for (auto& e : q) e /= den;
      s += lr->kernel(u, pos[v]) * detail::lowres_f(*lr, x, q) * mass[v];
    }
    return s;
  }
  throw InvalidArgument("Local interaction is not defined on discrete measures");
}

/// F(x, m(t), u) for per-cell densities m_y(u_k) weighted by the atlas.
inline double eval_interaction(const InteractionSpec& spec, std::size_t x, const CellMeasure& m, double u) {
  using namespace interaction;
  const PositionAtlas& atlas = *m.atlas;
  const std::size_t d = m.states;
  if (std::holds_alternative<Zero>(spec)) return 0.0;
  if (auto* tb = std::get_if<TwoBody>(&spec)) {
    double s = 0.0;
    for (std::size_t k = 0; k < atlas.size(); ++k) {
      double inner = 0.0;
      for (std::size_t y = 0; y < d; ++y) inner += tb->f(x, y) * m(k, y);
      s += tb->kernel(u, atlas.cell(k)) * inner * atlas.weight(k);
    }
    return s;
  }
  if (auto* lr = std::get_if<LowRes>(&spec)) {
    std::vector<double> q(d);
    double s = 0.0;
    for (std::size_t v = 0; v < atlas.size(); ++v) {
      std::fill(q.begin(), q.end(), 0.0);
      double den = 0.0;
      for (std::size_t w = 0; w < atlas.size(); ++w) {
        double pw = lr->smoothing(atlas.cell(v), atlas.cell(w)) * atlas.weight(w);
        den += pw;
        for (std::size_t y = 0; y < d; ++y) q[y] += pw * m(w, y);
      }
      detail::check_denominator(den);
      for (auto& e : q) e /= den;
      s += lr->kernel(u, atlas.cell(v)) * detail::lowres_f(*lr, x, q) * atlas.weight(v);
    }
    return s;
  }
  const auto& lo = std::get<Local>(spec);
  std::size_t c = atlas.nearest(u);
  double s = 0.0;
  for (std::size_t y = 0; y < d; ++y) s += lo.f(x, y) * m(c, y);
  return s;
}

/// F(x, m, u_c) for every atlas cell c and state x (cell-major). Same values
/// as eval_interaction, with the per-cell work shared across cells.
inline std::vector<double> interaction_table(const InteractionSpec& spec, const CellMeasure& m) {
  using namespace interaction;
  const PositionAtlas& atlas = *m.atlas;
  const std::size_t d = m.states, n = atlas.size();
  std::vector<double> out(n * d, 0.0);
  if (std::holds_alternative<Zero>(spec)) return out;

  // g[k][x]: the state part of the integrand at cell k.
  std::vector<double> g(n * d, 0.0);
  const Kernel* kernel = nullptr;
  if (auto* tb = std::get_if<TwoBody>(&spec)) {
    kernel = &tb->kernel;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t x = 0; x < d; ++x) {
        double inner = 0.0;
        for (std::size_t y = 0; y < d; ++y) inner += tb->f(x, y) * m(k, y);
        g[k * d + x] = inner;
      }
  } else if (auto* lr = std::get_if<LowRes>(&spec)) {
    kernel = &lr->kernel;
    std::vector<double> q(d);
    for (std::size_t v = 0; v < n; ++v) {
      std::fill(q.begin(), q.end(), 0.0);
      double den = 0.0;
      for (std::size_t w = 0; w < n; ++w) {
        double pw = lr->smoothing(atlas.cell(v), atlas.cell(w)) * atlas.weight(w);
        den += pw;
        for (std::size_t y = 0; y < d; ++y) q[y] += pw * m(w, y);
      }
      detail::check_denominator(den);
      for (auto& e : q) e /= den;
      for (std::size_t x = 0; x < d; ++x) g[v * d + x] = detail::lowres_f(*lr, x, q);
    }
  } else {
    const auto& lo = std::get<Local>(spec);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t x = 0; x < d; ++x) {
        double s = 0.0;
        for (std::size_t y = 0; y < d; ++y) s += lo.f(x, y) * m(c, y);
        out[c * d + x] = s;
      }
    return out;
  }
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t k = 0; k < n; ++k) {
      double kw = (*kernel)(atlas.cell(c), atlas.cell(k)) * atlas.weight(k);
      if (kw == 0.0) continue;
      for (std::size_t x = 0; x < d; ++x) out[c * d + x] += kw * g[k * d + x];
    }
  return out;
}

}  // namespace lrmfg
