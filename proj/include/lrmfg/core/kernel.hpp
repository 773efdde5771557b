#pragma once

#include <array>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "lrmfg/core/error.hpp"
#include "lrmfg/graphon/kernel_matrix.hpp"

namespace lrmfg {

/// Position kernel K(u, v).
class Kernel {
public:
  enum class Kind { Bilinear, Gaussian, Step, Custom };

  /// K(u, v) = c0 + cu * u + cv * v + cuv * u * v.
  static Kernel bilinear(double c0, double cu, double cv, double cuv) {
    Kernel k(Kind::Bilinear);
    k.p_ = {c0, cu, cv, cuv};
    return k;
  }
  static Kernel constant(double c) { return bilinear(c, 0.0, 0.0, 0.0); }
  /// (u + v) / 2
  static Kernel average() { return bilinear(0.0, 0.5, 0.5, 0.0); }
  /// u * v
  static Kernel product() { return bilinear(0.0, 0.0, 0.0, 1.0); }

  /// amplitude * exp(-(u - v)^2 / (2 width^2))
  static Kernel gaussian(double amplitude, double width) {
    require(width > 0.0, "Kernel: gaussian width must be positive");
    Kernel k(Kind::Gaussian);
    k.p_ = {amplitude, width, 0.0, 0.0};
    return k;
  }

  /// Step extension of a matrix sampled on {i/n}.
  static Kernel step(KernelMatrix w) {
    Kernel k(Kind::Step);
    k.matrix_ = std::make_shared<const KernelMatrix>(std::move(w));
    return k;
  }

  static Kernel custom(std::function<double(double, double)> fn,
                       double bound = std::numeric_limits<double>::infinity()) {
    require(static_cast<bool>(fn), "Kernel: empty custom function");
    Kernel k(Kind::Custom);
    k.fn_ = std::move(fn);
    k.custom_bound_ = bound;
    return k;
  }

  double operator()(double u, double v) const {
    switch (kind_) {
      case Kind::Bilinear:
        return p_[0] + p_[1] * u + p_[2] * v + p_[3] * u * v;
      case Kind::Gaussian: {
        double z = (u - v) / p_[1];
        return p_[0] * std::exp(-0.5 * z * z);
      }
      case Kind::Step:
        return matrix_->step_value(u, v);
      case Kind::Custom:
        return fn_(u, v);
    }
    return 0.0;
  }

  /// Declared bound on |K| over [0, 1]^2.
  double bound() const {
    switch (kind_) {
      case Kind::Bilinear: {
        double m = 0.0;
        for (double u : {0.0, 1.0})
          for (double v : {0.0, 1.0}) m = std::max(m, std::abs((*this)(u, v)));
        return m;
      }
      case Kind::Gaussian:
        return std::abs(p_[0]);
      case Kind::Step:
        return matrix_->max_abs();
      case Kind::Custom:
        return custom_bound_;
    }
    return 0.0;
  }

  Kind kind() const noexcept { return kind_; }
  const std::array<double, 4>& params() const noexcept { return p_; }
  const KernelMatrix* matrix() const noexcept { return matrix_.get(); }

  bool is_zero() const noexcept {
    return kind_ == Kind::Bilinear && p_[0] == 0.0 && p_[1] == 0.0 && p_[2] == 0.0 && p_[3] == 0.0;
  }

  friend bool operator==(const Kernel& a, const Kernel& b) {
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
      case Kind::Bilinear:
      case Kind::Gaussian:
        return a.p_ == b.p_;
      case Kind::Step:
        return *a.matrix_ == *b.matrix_;
      case Kind::Custom:
        return false;
    }
    return false;
  }

private:
  explicit Kernel(Kind k) : kind_(k) {}

  Kind kind_;
  std::array<double, 4> p_{};
  std::shared_ptr<const KernelMatrix> matrix_;
  std::function<double(double, double)> fn_;
  double custom_bound_ = std::numeric_limits<double>::infinity();
};

/// Smoothing weight phi(v, w) > 0 of low-resolution interactions.
class Smoothing {
public:
  enum class Kind { Constant, Gaussian, Custom };

  static Smoothing constant(double c) {
    require(c > 0.0, "Smoothing: constant must be positive");
    Smoothing s(Kind::Constant);
    s.a_ = c;
    return s;
  }
  /// exp(-(v - w)^2 / (2 width^2))
  static Smoothing gaussian(double width) {
    require(width > 0.0, "Smoothing: gaussian width must be positive");
    Smoothing s(Kind::Gaussian);
    s.a_ = width;
    return s;
  }
  static Smoothing custom(std::function<double(double, double)> fn) {
    require(static_cast<bool>(fn), "Smoothing: empty custom function");
    Smoothing s(Kind::Custom);
    s.fn_ = std::move(fn);
    return s;
  }

  double operator()(double v, double w) const {
    switch (kind_) {
      case Kind::Constant:
        return a_;
      case Kind::Gaussian: {
        double z = (v - w) / a_;
        return std::exp(-0.5 * z * z);
      }
      case Kind::Custom:
        return fn_(v, w);
    }
    return 0.0;
  }

  Kind kind() const noexcept { return kind_; }
  double parameter() const noexcept { return a_; }

  friend bool operator==(const Smoothing& a, const Smoothing& b) {
    return a.kind_ != Kind::Custom && a.kind_ == b.kind_ && a.a_ == b.a_;
  }

private:
  explicit Smoothing(Kind k) : kind_(k) {}
  Kind kind_;
  double a_ = 1.0;
  std::function<double(double, double)> fn_;
};

}  // namespace lrmfg
