#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lrmfg/core/error.hpp"

namespace lrmfg {

/// Finite state space {0, ..., d-1}. External formats label states 1..d.
class StateSpace {
public:
  explicit StateSpace(std::size_t d) : d_(d) {
    require(d >= 2, "StateSpace: need at least two states");
  }
  std::size_t size() const noexcept { return d_; }
  friend bool operator==(const StateSpace&, const StateSpace&) = default;

private:
  std::size_t d_;
};

/// Uniform grid t_k = k * dt on [0, T].
class TimeGrid {
public:
  TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
    require(std::isfinite(horizon) && horizon > 0.0, "TimeGrid: horizon must be positive");
    require(n_steps >= 1, "TimeGrid: need at least one step");
  }

  double horizon() const noexcept { return horizon_; }
  std::size_t steps() const noexcept { return n_steps_; }
  std::size_t points() const noexcept { return n_steps_ + 1; }
  double dt() const noexcept { return horizon_ / static_cast<double>(n_steps_); }
  double time(std::size_t k) const noexcept {
    return k == n_steps_ ? horizon_ : static_cast<double>(k) * dt();
  }
  /// Index of the slab [t_k, t_{k+1}) containing t; t = T maps to the last slab.
  std::size_t slab(double t) const noexcept {
    if (t <= 0.0) return 0;
    auto k = static_cast<std::size_t>(t / dt());
    return std::min(k, n_steps_ - 1);
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
  double horizon_;
  std::size_t n_steps_;
};

/// Finite quantization of the position measure: cells u_k with weights mu_k.
class PositionAtlas {
public:
  PositionAtlas(std::vector<double> cells, std::vector<double> weights)
      : cells_(std::move(cells)), weights_(std::move(weights)) {
    require(!cells_.empty(), "PositionAtlas: empty atlas");
    require(cells_.size() == weights_.size(),
            "PositionAtlas: cells and weights differ in length");
    double total = 0.0;
    for (double w : weights_) {
      require(std::isfinite(w) && w >= 0.0, "PositionAtlas: weights must be nonnegative");
      total += w;
    }
    require(std::abs(total - 1.0) <= 1e-12, "PositionAtlas: weights must sum to 1");
    std::vector<double> sorted = cells_;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      require(std::isfinite(sorted[k]), "PositionAtlas: non-finite cell");
      if (k > 0) require(sorted[k] != sorted[k - 1], "PositionAtlas: duplicate cell");
    }
  }

  /// M equal-weight cells at the midpoints (k + 1/2)/M of [0, 1].
  static PositionAtlas uniform(std::size_t m) {
    require(m >= 1, "PositionAtlas::uniform: need at least one cell");
    std::vector<double> cells(m), weights(m, 1.0 / static_cast<double>(m));
    for (std::size_t k = 0; k < m; ++k)
      cells[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
    // Exact unit sum regardless of rounding in 1/M.
    weights.back() = 1.0 - std::accumulate(weights.begin(), weights.end() - 1, 0.0);
    return PositionAtlas(std::move(cells), std::move(weights));
  }

  std::size_t size() const noexcept { return cells_.size(); }
  double cell(std::size_t k) const { return cells_.at(k); }
  double weight(std::size_t k) const { return weights_.at(k); }
  const std::vector<double>& cells() const noexcept { return cells_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// Nearest cell by Euclidean distance; ties go to the lower index.
  std::size_t nearest(double u) const noexcept {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cells_.size(); ++k) {
      double dist = std::abs(cells_[k] - u);
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    return best;
  }

  friend bool operator==(const PositionAtlas&, const PositionAtlas&) = default;

private:
  std::vector<double> cells_;
  std::vector<double> weights_;
};

/// Fixed positions of the N players.
class PlayerLayout {
public:
  explicit PlayerLayout(std::vector<double> positions) : positions_(std::move(positions)) {
    require(!positions_.empty(), "PlayerLayout: need at least one player");
    std::vector<double> sorted = positions_;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      require(std::isfinite(sorted[k]), "PlayerLayout: non-finite position");
      if (k > 0)
        require(sorted[k] != sorted[k - 1], "PlayerLayout: positions must be pairwise distinct");
    }
  }

  /// Kac layout u_i = i/N, i = 1..N.
  static PlayerLayout grid(std::size_t n) {
    std::vector<double> pos(n);
    for (std::size_t i = 0; i < n; ++i)
      pos[i] = static_cast<double>(i + 1) / static_cast<double>(n);
    return PlayerLayout(std::move(pos));
  }

  std::size_t size() const noexcept { return positions_.size(); }
  double position(std::size_t i) const { return positions_.at(i); }
  const std::vector<double>& positions() const noexcept { return positions_; }

private:
  std::vector<double> positions_;
};

/// Dense (time, cell, state) array. The tag keeps flows and value fields apart.
template <class Tag>
class CellField {
public:
  CellField() = default;
  CellField(std::size_t times, std::size_t cells, std::size_t states, double fill = 0.0)
      : times_(times), cells_(cells), states_(states), data_(times * cells * states, fill) {}

  std::size_t times() const noexcept { return times_; }
  std::size_t cells() const noexcept { return cells_; }
  std::size_t states() const noexcept { return states_; }

  double& operator()(std::size_t k, std::size_t c, std::size_t x) {
    return data_[(k * cells_ + c) * states_ + x];
  }
  double operator()(std::size_t k, std::size_t c, std::size_t x) const {
    return data_[(k * cells_ + c) * states_ + x];
  }

  std::span<double> at(std::size_t k, std::size_t c) {
    return {data_.data() + (k * cells_ + c) * states_, states_};
  }
  std::span<const double> at(std::size_t k, std::size_t c) const {
    return {data_.data() + (k * cells_ + c) * states_, states_};
  }
  /// All cells at time index k, cell-major.
  std::span<const double> slice(std::size_t k) const {
    return {data_.data() + k * cells_ * states_, cells_ * states_};
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  bool same_shape(const CellField& o) const noexcept {
    return times_ == o.times_ && cells_ == o.cells_ && states_ == o.states_;
  }

  friend bool operator==(const CellField&, const CellField&) = default;

private:
  std::size_t times_ = 0, cells_ = 0, states_ = 0;
  std::vector<double> data_;
};

struct MeasureTag {};
struct ValueTag {};

/// m_x(t_k, u_c): conditional state distribution per time point and cell.
using MeasureFlow = CellField<MeasureTag>;
/// V(t_k, x, u_c).
using ValueField = CellField<ValueTag>;

/// Jump intensities alpha[t_k][cell][from][to]. Entry k is applied on the
/// slab [t_k, t_{k+1}); the diagonal is stored as 0.
class Policy {
public:
  Policy() = default;
  Policy(std::size_t times, std::size_t cells, std::size_t states)
      : times_(times), cells_(cells), states_(states),
        data_(times * cells * states * states, 0.0) {}

  std::size_t times() const noexcept { return times_; }
  std::size_t cells() const noexcept { return cells_; }
  std::size_t states() const noexcept { return states_; }

  double& operator()(std::size_t k, std::size_t c, std::size_t x, std::size_t y) {
    return data_[((k * cells_ + c) * states_ + x) * states_ + y];
  }
  double operator()(std::size_t k, std::size_t c, std::size_t x, std::size_t y) const {
    return data_[((k * cells_ + c) * states_ + x) * states_ + y];
  }
  /// Row of rates out of state x.
  std::span<const double> row(std::size_t k, std::size_t c, std::size_t x) const {
    return {data_.data() + ((k * cells_ + c) * states_ + x) * states_, states_};
  }
  std::span<double> row(std::size_t k, std::size_t c, std::size_t x) {
    return {data_.data() + ((k * cells_ + c) * states_ + x) * states_, states_};
  }

  double exit_rate(std::size_t k, std::size_t c, std::size_t x) const {
    auto r = row(k, c, x);
    double total = 0.0;
    for (std::size_t y = 0; y < states_; ++y)
      if (y != x) total += r[y];
    return total;
  }

  double max_rate() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, v);
    return m;
  }

  const std::vector<double>& data() const noexcept { return data_; }
  friend bool operator==(const Policy&, const Policy&) = default;

private:
  std::size_t times_ = 0, cells_ = 0, states_ = 0;
  std::vector<double> data_;
};

/// One point mass of a discrete measure on U x Sigma.
struct Atom {
  double position;
  std::size_t state;
  double mass;
};

/// Finitely supported probability on U x Sigma.
class DiscreteMeasure {
public:
  DiscreteMeasure() = default;
  explicit DiscreteMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    double total = 0.0;
    for (const auto& a : atoms_) {
      require(std::isfinite(a.mass) && a.mass >= 0.0, "DiscreteMeasure: negative mass");
      total += a.mass;
    }
    require(std::abs(total - 1.0) <= 1e-12, "DiscreteMeasure: masses must sum to 1");
  }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }

private:
  std::vector<Atom> atoms_;
};

/// Per-cell densities at a single time plus the atlas that weights them.
struct CellMeasure {
  std::span<const double> values;  // cell-major, cells * states
  std::size_t states;
  const PositionAtlas* atlas;

  double operator()(std::size_t c, std::size_t y) const { return values[c * states + y]; }
};

/// Checks the simplex invariant of every (time, cell) row.
template <class Tag>
bool is_on_simplex(const CellField<Tag>& f, double sum_tol = 1e-8, double neg_tol = 1e-9) {
  for (std::size_t k = 0; k < f.times(); ++k)
    for (std::size_t c = 0; c < f.cells(); ++c) {
      double s = 0.0;
      for (double v : f.at(k, c)) {
        if (!(v >= -neg_tol)) return false;
        s += v;
      }
      if (std::abs(s - 1.0) > sum_tol) return false;
    }
  return true;
}

}  // namespace lrmfg
