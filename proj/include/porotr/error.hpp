#pragma once

#include <stdexcept>
#include <string>

namespace porotr {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInput : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct HypothesisViolation : Error { using Error::Error; };
struct DomainTooSmall : Error { using Error::Error; };
struct UnstableConfiguration : Error { using Error::Error; };
struct SolverFailure : Error { using Error::Error; };
struct IncompatibleData : Error { using Error::Error; };
struct DivergenceDetected : Error { using Error::Error; };
struct DegenerateSource : Error { using Error::Error; };
struct InvalidPhantom : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace porotr
