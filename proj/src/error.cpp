#include "lp/error.hpp"

namespace lp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SpacingTooCoarse: return "SpacingTooCoarse";
    case ErrorCode::DegenerateDomain: return "DegenerateDomain";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::InconsistentHolonomy: return "InconsistentHolonomy";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::InconsistentState: return "InconsistentState";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::ResolutionGuard: return "ResolutionGuard";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::OutputUnwritable: return "OutputUnwritable";
  }
  return "Unknown";
}

}  // namespace lp
