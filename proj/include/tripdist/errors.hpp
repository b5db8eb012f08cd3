#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tripdist {

// Base of every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (shape mismatch, negative distance, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but mathematically degenerate (zero norm, constant ranks).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// Unknown sample or identity id.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Not enough identities/samples/combinations to satisfy a request.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Too few elements for a statistic to be defined.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

// Malformed or version-mismatched file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Training made no progress: mining produced nothing for too many batches in a row.
class StagnationError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, std::string_view what) {
  if (!cond) throw ContractViolation(std::string(what));
}

}  // namespace detail

}  // namespace tripdist
