#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "lrmfg/core/error.hpp"
#include "lrmfg/core/types.hpp"

namespace lrmfg {

/// Empirical measure of (position, state) of every player except `player`
/// (0-based), each with mass 1/(N-1).
inline DiscreteMeasure empirical_measure(const PlayerLayout& layout, std::span<const std::size_t> states,
                                         std::size_t player) {
  const std::size_t n = layout.size();
  if (n < 2) throw InvalidArgument("empirical_measure: needs at least two players");
  require(states.size() == n, "empirical_measure: one state per player required");
  require(player < n, "empirical_measure: player index out of range");
  const double w = 1.0 / static_cast<double>(n - 1);
  std::vector<Atom> atoms;
  atoms.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j)
    if (j != player) atoms.push_back({layout.position(j), states[j], w});
  return DiscreteMeasure(std::move(atoms));
}

/// Weighted L1 distance at one time, sum_x sum_c |m1 - m2| mu_c.
inline double slice_distance(std::span<const double> a, std::span<const double> b, std::size_t states,
                             const PositionAtlas& atlas) {
  double s = 0.0;
  for (std::size_t c = 0; c < atlas.size(); ++c) {
    double cell = 0.0;
    for (std::size_t x = 0; x < states; ++x) cell += std::abs(a[c * states + x] - b[c * states + x]);
    s += cell * atlas.weight(c);
  }
  return s;
}

/// sup over grid times of the weighted L1 distance between two flows.
inline double flow_distance(const MeasureFlow& m1, const MeasureFlow& m2, const PositionAtlas& atlas) {
  if (!m1.same_shape(m2)) throw GridMismatch("flow_distance: flows live on different grids");
  if (m1.cells() != atlas.size()) throw GridMismatch("flow_distance: atlas does not match flow cells");
  double sup = 0.0;
  for (std::size_t k = 0; k < m1.times(); ++k)
    sup = std::max(sup, slice_distance(m1.slice(k), m2.slice(k), m1.states(), atlas));
  return sup;
}

}  // namespace lrmfg
