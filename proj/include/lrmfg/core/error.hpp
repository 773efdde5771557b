#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lrmfg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A value violates a documented precondition or type invariant.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Two objects that must share a grid (time, atlas, states) do not.
class GridMismatch : public Error {
public:
  using Error::Error;
};

/// The generic projected-Newton minimizer did not reach tolerance.
class ArgminNotConverged : public Error {
public:
  ArgminNotConverged(std::vector<double> last_iterate, double residual)
      : Error("argmin_rates: projected Newton did not converge (residual " +
              std::to_string(residual) + ")"),
        last_iterate_(std::move(last_iterate)), residual_(residual) {}

  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
  double residual() const noexcept { return residual_; }

private:
  std::vector<double> last_iterate_;
  double residual_;
};

/// Non-finite value produced while integrating an ODE.
class IntegrationError : public Error {
public:
  IntegrationError(const std::string& what, std::size_t time_index, std::size_t cell)
      : Error(what + " at time index " + std::to_string(time_index) + ", cell " +
              std::to_string(cell)),
        time_index_(time_index), cell_(cell) {}

  std::size_t time_index() const noexcept { return time_index_; }
  std::size_t cell() const noexcept { return cell_; }

private:
  std::size_t time_index_;
  std::size_t cell_;
};

/// Forward solution left the probability simplex beyond tolerance.
class SimplexViolation : public IntegrationError {
public:
  using IntegrationError::IntegrationError;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace lrmfg
