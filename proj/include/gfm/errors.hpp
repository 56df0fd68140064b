#pragma once

#include <stdexcept>
#include <string>

namespace gfm {

/// Argument outside the mathematical domain of an operation (non-positive SCR,
/// zero voltage in a gain bound, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Steady-state solve failed; carries the last power-mismatch residual.
class InfeasibleOperatingPoint : public std::runtime_error {
 public:
  InfeasibleOperatingPoint(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Equivalent inductance of a controlled plant is not positive.
class DegenerateParameter : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed form requested outside the regime it was derived for.
class UnsupportedRegime : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gfm
