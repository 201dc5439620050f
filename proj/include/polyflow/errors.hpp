#ifndef POLYFLOW_ERRORS_HPP
#define POLYFLOW_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace polyflow {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Normalized time outside [0,1]; evaluation never extrapolates.
struct DomainError : Error {
  using Error::Error;
};

/// Shape or argument mismatch between caller and callee.
struct ContractError : Error {
  using Error::Error;
};

/// Invalid tunable (e.g. non-positive ridge weight).
struct ParamError : Error {
  using Error::Error;
};

/// Fewer observations than unknowns in a fitting problem.
struct UnderdeterminedError : Error {
  using Error::Error;
};

/// Normal equations rank-deficient or too ill-conditioned to trust.
struct SingularFitError : Error {
  double condition;
  SingularFitError(const std::string& msg, double cond)
      : Error(msg), condition(cond) {}
};

/// Constraint anchors coincide or duplicate; the KKT system is singular.
struct DegenerateAnchorError : Error {
  using Error::Error;
};

/// Requested window extends past the recorded trajectory.
struct InsufficientDataError : Error {
  using Error::Error;
};

/// More equality constraints than the basis can satisfy.
struct InfeasibleConstraintError : Error {
  using Error::Error;
};

/// Non-finite state encountered during training, inference or simulation.
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace polyflow

#endif
