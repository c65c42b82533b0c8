#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pmred {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Some unresolved eigenvalue beta_n (n > m) is non-negative.
class StabilityViolation : public Error {
 public:
  using Error::Error;
};

/// A required eigenvalue gap is not strictly positive.
class NRViolation : public Error {
 public:
  using Error::Error;
};

/// A time integrator left the finite range (blow-up guard).
class NonFinite : public Error {
 public:
  NonFinite(const std::string& what, std::int64_t step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

/// Ratio diagnostic whose denominator vanishes identically.
class DegenerateDenominator : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

/// Configuration failed validation; the message names the offending field.
class ConfigInvalid : public Error {
 public:
  ConfigInvalid(const std::string& field, const std::string& why)
      : Error(field + ": " + why), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace pmred
