#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "lrmfg/core/error.hpp"

namespace lrmfg {

/// n x n step kernel: entry (i, j) is the constant value of the kernel on
/// ((i-1)/n, i/n] x ((j-1)/n, j/n] (1-based i, j).
class KernelMatrix {
public:
  KernelMatrix() = default;
  explicit KernelMatrix(std::size_t n, double fill = 0.0) : n_(n), w_(n * n, fill) {
    require(n >= 1, "KernelMatrix: n must be at least 1");
  }
  KernelMatrix(std::size_t n, std::vector<double> entries) : n_(n), w_(std::move(entries)) {
    require(n >= 1, "KernelMatrix: n must be at least 1");
    require(w_.size() == n * n, "KernelMatrix: expected n*n entries");
    for (double v : w_) require(std::isfinite(v), "KernelMatrix: entries must be finite");
  }

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return w_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {w_.data() + i * n_, n_}; }
  const std::vector<double>& data() const noexcept { return w_; }

  /// Step-function value at (u, v) in [0, 1]^2.
  double step_value(double u, double v) const noexcept {
    return w_[index(u) * n_ + index(v)];
  }

  std::size_t index(double u) const noexcept {
    double scaled = std::ceil(u * static_cast<double>(n_)) - 1.0;
    if (!(scaled > 0.0)) return 0;
    auto i = static_cast<std::size_t>(scaled);
    return i >= n_ ? n_ - 1 : i;
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : w_) m = std::max(m, std::abs(v));
    return m;
  }

  KernelMatrix operator-(const KernelMatrix& o) const {
    if (o.n_ != n_) throw GridMismatch("KernelMatrix: size mismatch");
    KernelMatrix r(n_);
    for (std::size_t k = 0; k < w_.size(); ++k) r.w_[k] = w_[k] - o.w_[k];
    return r;
  }
  KernelMatrix operator+(const KernelMatrix& o) const {
    if (o.n_ != n_) throw GridMismatch("KernelMatrix: size mismatch");
    KernelMatrix r(n_);
    for (std::size_t k = 0; k < w_.size(); ++k) r.w_[k] = w_[k] + o.w_[k];
    return r;
  }
  KernelMatrix operator*(double s) const {
    KernelMatrix r(n_);
    for (std::size_t k = 0; k < w_.size(); ++k) r.w_[k] = s * w_[k];
    return r;
  }

  friend bool operator==(const KernelMatrix&, const KernelMatrix&) = default;

private:
  std::size_t n_ = 0;
  std::vector<double> w_;
};

}  // namespace lrmfg
