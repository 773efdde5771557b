#pragma once

// Graphon sampling and cut-norm estimation for step kernels on [0,1]^2.
//
// Norms are normalized by n^2 so that a KernelMatrix and its step extension
// have the same cut norm. Exact computation enumerates one side and picks the
// other side greedily, which is exact because for a fixed row set the best
// column set is read off the signs of the column sums.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lrmfg/core/error.hpp"
#include "lrmfg/core/random.hpp"
#include "lrmfg/graphon/kernel_matrix.hpp"

namespace lrmfg {

inline constexpr std::size_t kExactNormMaxN = 14;

enum class NormMethod { Exact, Heuristic };

inline const char* method_name(NormMethod m) { return m == NormMethod::Exact ? "exact" : "heuristic"; }

struct NormEstimate {
  double value = 0.0;
  NormMethod method = NormMethod::Exact;
  // Cut norm witnesses: 0-based row set S and column set T.
  std::vector<std::size_t> rows, cols;
  // Infinity-to-one witnesses: sign vectors.
  std::vector<int> row_signs, col_signs;
};

/// W[i][j] = K(i/n, j/n), i, j = 1..n.
template <class KernelFn>
KernelMatrix discretize_kernel(const KernelFn& kernel, std::size_t n) {
  KernelMatrix w(n);
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w(i, j) = kernel(static_cast<double>(i + 1) / nn, static_cast<double>(j + 1) / nn);
  return w;
}

/// Independent Bernoulli(K(i/n, j/n)) entries; entry (i, j) reads its own
/// counter-based stream, so the matrix depends only on the seed.
template <class KernelFn>
KernelMatrix sample_bernoulli_graph(const KernelFn& kernel, std::size_t n, std::uint64_t seed) {
  KernelMatrix p = discretize_kernel(kernel, n);
  KernelMatrix w(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, 0x67726170, i);
    for (std::size_t j = 0; j < n; ++j) {
      double pij = p(i, j);
      if (!(pij >= 0.0 && pij <= 1.0))
        throw InvalidArgument("sample_bernoulli_graph: K(" + std::to_string(i + 1) + "/n, " +
                              std::to_string(j + 1) + "/n) = " + std::to_string(pij) + " is outside [0, 1]");
      w(i, j) = rng.uniform() < pij ? 1.0 : 0.0;
    }
  }
  return w;
}

namespace detail {

inline double block_sum(const KernelMatrix& d, const std::vector<std::size_t>& rows,
                        const std::vector<std::size_t>& cols) {
  double s = 0.0;
  for (auto i : rows)
    for (auto j : cols) s += d(i, j);
  return s;
}

inline std::vector<std::size_t> mask_members(std::uint32_t mask, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (mask & (1u << i)) out.push_back(i);
  return out;
}

inline void require_exact_size(const KernelMatrix& d) {
  if (d.size() > kExactNormMaxN)
    throw InvalidArgument("exact norm enumeration is limited to n <= " + std::to_string(kExactNormMaxN) +
                          " (got n = " + std::to_string(d.size()) + "); use the heuristic estimator");
}

}  // namespace detail

/// max_{S,T} |sum_{i in S, j in T} D_ij| / n^2 by enumerating S.
inline NormEstimate cut_norm_exact(const KernelMatrix& d) {
  detail::require_exact_size(d);
  const std::size_t n = d.size();
  std::vector<double> colsum(n, 0.0);
  double best = -1.0;
  std::uint32_t best_mask = 0;
  bool best_positive = true;
  const std::uint32_t total = 1u << n;
  for (std::uint32_t g = 0; g < total; ++g) {
    // Gray-code walk: one row toggles between consecutive subsets.
    std::uint32_t mask = g ^ (g >> 1);
    if (g > 0) {
      std::uint32_t prev = (g - 1) ^ ((g - 1) >> 1);
      std::uint32_t flip = mask ^ prev;
      auto i = static_cast<std::size_t>(__builtin_ctz(flip));
      double sign = (mask & flip) ? 1.0 : -1.0;
      for (std::size_t j = 0; j < n; ++j) colsum[j] += sign * d(i, j);
    }
    double pos = 0.0, neg = 0.0;
    for (double c : colsum) (c > 0.0 ? pos : neg) += c;
    if (pos > best) {
      best = pos;
      best_mask = mask;
      best_positive = true;
    }
    if (-neg > best) {
      best = -neg;
      best_mask = mask;
      best_positive = false;
    }
  }
  NormEstimate est;
  est.method = NormMethod::Exact;
  est.rows = detail::mask_members(best_mask, n);
  std::vector<double> cs(n, 0.0);
  for (auto i : est.rows)
    for (std::size_t j = 0; j < n; ++j) cs[j] += d(i, j);
  for (std::size_t j = 0; j < n; ++j)
    if (best_positive ? cs[j] > 0.0 : cs[j] < 0.0) est.cols.push_back(j);
  est.value = std::abs(detail::block_sum(d, est.rows, est.cols)) / static_cast<double>(n * n);
  return est;
}

/// Alternating maximization lower bound on the cut norm: from a random
/// column set, repeatedly take the rows whose partial sums have the target
/// sign, then the columns, for both target signs, followed by single-row flip
/// moves scored with their best column set. Restart r uses stream r of
/// `seed`, so a larger restart budget never lowers the estimate.
inline NormEstimate cut_norm_heuristic(const KernelMatrix& d, std::size_t restarts, std::uint64_t seed) {
  require(restarts >= 1, "cut_norm_heuristic: need at least one restart");
  const std::size_t n = d.size();
  NormEstimate best;
  best.method = NormMethod::Heuristic;
  best.value = -1.0;
  std::vector<double> rs(n), cs(n);
  std::vector<char> in_s(n), in_t(n), start(n);
  for (std::size_t r = 0; r < restarts; ++r) {
    CounterRng rng(seed, 0x6375746e, r);
    for (std::size_t j = 0; j < n; ++j) start[j] = rng.uniform() < 0.5;
    for (double sigma : {1.0, -1.0}) {
      in_t = start;
      double val = -1.0;
      for (int iter = 0; iter < 1000; ++iter) {
        std::fill(rs.begin(), rs.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          auto row = d.row(i);
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j)
            if (in_t[j]) s += row[j];
          rs[i] = s;
          in_s[i] = sigma * s > 0.0;
        }
        std::fill(cs.begin(), cs.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          if (!in_s[i]) continue;
          auto row = d.row(i);
          for (std::size_t j = 0; j < n; ++j) cs[j] += row[j];
        }
        double next = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          in_t[j] = sigma * cs[j] > 0.0;
          if (in_t[j]) next += sigma * cs[j];
        }
        if (!(next > val * (1.0 + 1e-15) + 1e-300)) break;
        val = next;
      }
      // Single-row flips of S, each scored with its best column set.
      for (bool improved = true; improved;) {
        improved = false;
        for (std::size_t i = 0; i < n; ++i) {
          auto row = d.row(i);
          double sign = in_s[i] ? -1.0 : 1.0, trial = 0.0;
          for (std::size_t j = 0; j < n; ++j) trial += std::max(0.0, sigma * (cs[j] + sign * row[j]));
          if (!(trial > val * (1.0 + 1e-12) + 1e-300)) continue;
          in_s[i] = !in_s[i];
          for (std::size_t j = 0; j < n; ++j) cs[j] += sign * row[j];
          val = trial;
          improved = true;
        }
      }
      for (std::size_t j = 0; j < n; ++j) in_t[j] = sigma * cs[j] > 0.0;
      if (val / static_cast<double>(n * n) > best.value) {
        best.value = val / static_cast<double>(n * n);
        best.rows.clear();
        best.cols.clear();
        for (std::size_t i = 0; i < n; ++i)
          if (in_s[i]) best.rows.push_back(i);
        for (std::size_t j = 0; j < n; ++j)
          if (in_t[j]) best.cols.push_back(j);
      }
    }
  }
  best.value = std::abs(detail::block_sum(d, best.rows, best.cols)) / static_cast<double>(n * n);
  return best;
}

namespace detail {

inline double bilinear_value(const KernelMatrix& d, const std::vector<int>& s, const std::vector<int>& t) {
  double v = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double rowsum = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) rowsum += d(i, j) * t[j];
    v += s[i] * rowsum;
  }
  return v;
}

}  // namespace detail

/// max_{s,t in {-1,1}^n} sum_ij D_ij s_i t_j / n^2.
inline NormEstimate infty_to_one_norm(const KernelMatrix& d, NormMethod mode, std::size_t restarts = 16,
                                      std::uint64_t seed = 0) {
  const std::size_t n = d.size();
  NormEstimate est;
  est.method = mode;
  if (mode == NormMethod::Exact) {
    detail::require_exact_size(d);
    // s_0 = +1 without loss of generality; the walk over the other n - 1
    // signs is a Gray code on `mask` (bit i set means s_{i+1} = -1).
    std::vector<double> colsum(n);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += d(i, j);
      colsum[j] = s;
    }
    double best = -1.0;
    std::uint32_t best_mask = 0;
    const std::uint32_t total = 1u << (n - 1);
    for (std::uint32_t g = 0; g < total; ++g) {
      std::uint32_t mask = g ^ (g >> 1);
      if (g > 0) {
        std::uint32_t flip = mask ^ ((g - 1) ^ ((g - 1) >> 1));
        auto i = static_cast<std::size_t>(__builtin_ctz(flip)) + 1;
        double delta = (mask & flip) ? -2.0 : 2.0;
        for (std::size_t j = 0; j < n; ++j) colsum[j] += delta * d(i, j);
      }
      double v = 0.0;
      for (double c : colsum) v += std::abs(c);
      if (v > best) {
        best = v;
        best_mask = mask;
      }
    }
    est.row_signs.assign(n, 1);
    for (std::size_t i = 1; i < n; ++i)
      if (best_mask & (1u << (i - 1))) est.row_signs[i] = -1;
  } else {
    require(restarts >= 1, "infty_to_one_norm: need at least one restart");
    double best = -1.0;
    std::vector<int> s(n), t(n);
    std::vector<double> acc(n);
    for (std::size_t r = 0; r < restarts; ++r) {
      CounterRng rng(seed, 0x696e6631, r);
      for (auto& e : t) e = rng.uniform() < 0.5 ? -1 : 1;
      double val = -std::numeric_limits<double>::infinity();
      for (int iter = 0; iter < 1000; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
          double a = 0.0;
          for (std::size_t j = 0; j < n; ++j) a += d(i, j) * t[j];
          s[i] = a >= 0.0 ? 1 : -1;
        }
        double next = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          double a = 0.0;
          for (std::size_t i = 0; i < n; ++i) a += d(i, j) * s[i];
          t[j] = a >= 0.0 ? 1 : -1;
          next += std::abs(a);
        }
        if (!(next > val * (1.0 + 1e-15) + 1e-300)) break;
        val = next;
      }
      if (val > best) {
        best = val;
        est.row_signs = s;
      }
    }
  }
  // The best column signs follow from the row signs.
  est.col_signs.assign(n, 1);
  for (std::size_t j = 0; j < n; ++j) {
    double a = 0.0;
    for (std::size_t i = 0; i < n; ++i) a += d(i, j) * est.row_signs[i];
    est.col_signs[j] = a >= 0.0 ? 1 : -1;
  }
  est.value = detail::bilinear_value(d, est.row_signs, est.col_signs) / static_cast<double>(n * n);
  return est;
}

/// Nearest-neighbour refinement of an n-step matrix to resolution n * factor.
inline KernelMatrix upsample(const KernelMatrix& w, std::size_t factor) {
  const std::size_t n = w.size(), m = n * factor;
  KernelMatrix out(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = w(i / factor, j / factor);
  return out;
}

/// Heuristic estimate of the cut distance between the continuum kernel and
/// its n-step discretization, approximating the continuum by a 4n grid.
template <class KernelFn>
NormEstimate discretization_gap(const KernelFn& kernel, std::size_t n, std::size_t restarts, std::uint64_t seed) {
  constexpr std::size_t kRefine = 4;
  KernelMatrix fine = discretize_kernel(kernel, n * kRefine);
  KernelMatrix coarse = upsample(discretize_kernel(kernel, n), kRefine);
  return cut_norm_heuristic(fine - coarse, restarts, seed);
}

}  // namespace lrmfg
