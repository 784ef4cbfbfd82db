#pragma once

#include <stdexcept>
#include <string>

namespace bohm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: shape mismatches, bad parameters, invalid configs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A configuration or shift that leaves the simulation box.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Evaluation too close to a node of the wave function (density below floor).
class NodeError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Instability, non-convergence, or an experiment that cannot be concluded.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace bohm
