#pragma once

#include <stdexcept>
#include <string>

namespace mmqkd {

// Invalid input: out-of-range parameter, mismatched lengths, bad config.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The source has no support where the operation needs it (e.g. P1 = 0).
class DegenerateSourceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Measured statistics cannot come from any admissible channel.
class InconsistentObservablesError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A truncation or enumeration limit was hit before reaching the tolerance.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ArgumentError(what);
}

inline bool is_probability(double x) { return x >= 0.0 && x <= 1.0; }

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

}  // namespace detail
}  // namespace mmqkd
