#include "fedmuon/error.hpp"

namespace fedmuon {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::ZeroMatrix: return "ZeroMatrix";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::EmptyWorkerSet: return "EmptyWorkerSet";
    case ErrorCode::InvalidArg: return "InvalidArg";
    case ErrorCode::CalibrationFailed: return "CalibrationFailed";
    case ErrorCode::InsufficientRuns: return "InsufficientRuns";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace fedmuon
