#include "csumlab/error.hpp"

namespace csumlab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::RetargetInfeasible: return "RetargetInfeasible";
    case ErrorCode::UnknownPattern: return "UnknownPattern";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NoDependence: return "NoDependence";
    case ErrorCode::DegenerateSlope: return "DegenerateSlope";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::AlreadyPlanted: return "AlreadyPlanted";
    case ErrorCode::NotPlanted: return "NotPlanted";
    case ErrorCode::NoFeasibleNode: return "NoFeasibleNode";
    case ErrorCode::DegenerateWeight: return "DegenerateWeight";
    case ErrorCode::VerificationFailed: return "VerificationFailed";
    case ErrorCode::Exhausted: return "Exhausted";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::NoValidBin: return "NoValidBin";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::ConcurrentMutation: return "ConcurrentMutation";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::NotFound: return "NotFound";
  }
  return "Unknown";
}

}  // namespace csumlab
