#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace csumlab {

enum class ErrorCode {
  NonFiniteInput,
  RetargetInfeasible,
  UnknownPattern,
  InvalidArgument,
  OutOfRange,
  NoDependence,
  DegenerateSlope,
  InvalidSpec,
  ShapeMismatch,
  EmptyDataset,
  DivergenceDetected,
  AlreadyPlanted,
  NotPlanted,
  NoFeasibleNode,
  DegenerateWeight,
  VerificationFailed,
  Exhausted,
  ClassTooSmall,
  NoValidBin,
  UnknownSession,
  ConcurrentMutation,
  ValidationError,
  NotFound,
};

std::string_view to_string(ErrorCode code);

/// Every contract violation raised by the library carries one of the codes
/// above; front ends map them to exit codes / HTTP statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace csumlab
