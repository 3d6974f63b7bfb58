#pragma once

#include <stdexcept>
#include <string>

namespace nowcast {

/// Malformed or inconsistent input data (bad CSV rows, duplicate snapshots).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Not enough observations for an estimator; callers usually fall back.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested quantity does not exist yet (e.g. rate on an unconverged row).
class Unavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An observation with zero likelihood under every supported state.
class InfeasibleObservation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The sampler could not find a single admissible state.
class DegenerateState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nowcast
