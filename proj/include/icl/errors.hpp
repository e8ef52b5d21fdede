#pragma once

#include <stdexcept>
#include <string>

namespace icl {

// Bad input to an operation (non-finite logits, out-of-range tokens, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// KL divergence with p_i > 0 where q_i = 0.
class DivergenceInfinite : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An exact enumeration would exceed its configured size cap.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Every hypothesis assigns zero likelihood (or all weights underflow).
class DegeneratePosterior : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedMode : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Parameters outside the regime in which a closed-form bound is defined.
class InvalidRegime : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace icl
