#pragma once

#include <stdexcept>
#include <string>

namespace llc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A torus point set spreads too far to be embedded isometrically in R^d.
class NotEmbeddable : public Error {
 public:
  using Error::Error;
};

/// Brute-force builders refuse inputs that would blow up exponentially.
class SizeLimit : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class DensitySpecError : public Error {
 public:
  using Error::Error;
};

/// A Monte Carlo table cannot resolve the requested target.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

class LoopExtractionError : public Error {
 public:
  using Error::Error;
};

class ExperimentError : public Error {
 public:
  using Error::Error;
};

/// Raised when a simulation finds a lifetime above a conjectured maximum.
class ConjectureFalsified : public ExperimentError {
 public:
  using ExperimentError::ExperimentError;
};

}  // namespace llc
