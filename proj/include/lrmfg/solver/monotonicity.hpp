#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "lrmfg/core/interaction.hpp"
#include "lrmfg/core/random.hpp"
#include "lrmfg/solver/mfg.hpp"

namespace lrmfg {

struct MonotonicityReport {
  double min_value = std::numeric_limits<double>::infinity();
  std::size_t samples = 0;
  struct Witness {
    std::size_t sample;
    std::vector<double> m;        // cell-major densities
    std::vector<double> m_tilde;
    double value;
  };
  std::optional<Witness> violation;  // first pair with value < -1e-10

  bool monotone() const noexcept { return !violation.has_value(); }
};

/// sum_x sum_c [F(x, m, u_c) - F(x, m~, u_c)] (m_x(u_c) - m~_x(u_c)) mu_c.
inline double monotonicity_pairing(const InteractionSpec& spec, const PositionAtlas& atlas, std::size_t d,
                                   std::span<const double> m, std::span<const double> mt) {
  auto fa = interaction_table(spec, {m, d, &atlas});
  auto fb = interaction_table(spec, {mt, d, &atlas});
  double s = 0.0;
  for (std::size_t c = 0; c < atlas.size(); ++c) {
    double cell = 0.0;
    for (std::size_t x = 0; x < d; ++x) cell += (fa[c * d + x] - fb[c * d + x]) * (m[c * d + x] - mt[c * d + x]);
    s += cell * atlas.weight(c);
  }
  return s;
}

/// Sampling-based evidence for the monotonicity condition: draws pairs of
/// measures in P_mu with per-cell flat-Dirichlet densities. A nonnegative
/// minimum does not prove monotonicity.
inline MonotonicityReport check_monotonicity(const InteractionSpec& spec, const PositionAtlas& atlas,
                                             std::size_t d, std::size_t n_samples, std::uint64_t seed) {
  require(n_samples >= 1, "check_monotonicity: need at least one sample");
  validate(spec, d, &atlas);
  MonotonicityReport rep;
  const std::size_t m = atlas.size();
  std::vector<double> a(m * d), b(m * d);
  for (std::size_t s = 0; s < n_samples; ++s) {
    CounterRng rng(seed, 0x6d6f6e6f, s);
    for (std::size_t c = 0; c < m; ++c) {
      dirichlet_point(rng, std::span<double>(a.data() + c * d, d));
      dirichlet_point(rng, std::span<double>(b.data() + c * d, d));
    }
    double v = monotonicity_pairing(spec, atlas, d, a, b);
    rep.min_value = std::min(rep.min_value, v);
    ++rep.samples;
    if (v < -1e-10 && !rep.violation) rep.violation = MonotonicityReport::Witness{s, a, b, v};
  }
  return rep;
}

}  // namespace lrmfg
