#include "estimate/error.hpp"

namespace estimate {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::EmptyPanel: return "EmptyPanel";
    case ErrorCode::NonPositivePrice: return "NonPositivePrice";
    case ErrorCode::CorruptRow: return "CorruptRow";
    case ErrorCode::ZeroPrice: return "ZeroPrice";
    case ErrorCode::CalendarTooShort: return "CalendarTooShort";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::GraphConsumed: return "GraphConsumed";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::ZeroDegreeVertex: return "ZeroDegreeVertex";
    case ErrorCode::DecompositionFailed: return "DecompositionFailed";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::NoTrainableDays: return "NoTrainableDays";
    case ErrorCode::DegenerateDay: return "DegenerateDay";
    case ErrorCode::MissingPrice: return "MissingPrice";
    case ErrorCode::PhaseCheckpointMissing: return "PhaseCheckpointMissing";
    case ErrorCode::UnknownCommand: return "UnknownCommand";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::UpstreamArtifactMissing: return "UpstreamArtifactMissing";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

bool is_data_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingColumn:
    case ErrorCode::EmptyPanel:
    case ErrorCode::NonPositivePrice:
    case ErrorCode::CorruptRow:
    case ErrorCode::ZeroPrice:
    case ErrorCode::CalendarTooShort:
    case ErrorCode::InsufficientHistory:
    case ErrorCode::MissingPrice:
    case ErrorCode::NoTrainableDays:
      return true;
    default:
      return false;
  }
}

}  // namespace estimate
