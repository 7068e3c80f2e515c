#pragma once

#include <stdexcept>
#include <string>

namespace dperc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model or algorithm parameters (violated precondition).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A problem size exceeds what exact enumeration or exact transport supports.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A numerical invariant that must hold by construction was violated.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dperc
