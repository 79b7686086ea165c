#pragma once

#include <stdexcept>
#include <string>

namespace lipwalk {

/// A precondition on a model, controller or simulation parameter was violated.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The step period is zero, so sinh(T/T_c) vanishes and the gain bounds are undefined.
class DegeneratePeriod : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A periodic-gait solver hit a zero denominator. `bound()` names the offending
/// gain ("b_min", "b_max" or "period2").
class NoIsolatedFixedPoint : public std::domain_error {
 public:
  NoIsolatedFixedPoint(std::string bound, const std::string& what)
      : std::domain_error(what), bound_(std::move(bound)) {}

  const std::string& bound() const noexcept { return bound_; }

 private:
  std::string bound_;
};

}  // namespace lipwalk
