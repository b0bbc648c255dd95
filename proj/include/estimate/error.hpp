#pragma once

#include <stdexcept>
#include <string>

namespace estimate {

enum class ErrorCode {
  InvalidArgument,
  MissingColumn,
  EmptyPanel,
  NonPositivePrice,
  CorruptRow,
  ZeroPrice,
  CalendarTooShort,
  ShapeMismatch,
  NonFiniteValue,
  NonScalarLoss,
  GraphConsumed,
  WindowTooShort,
  InsufficientHistory,
  ZeroDegreeVertex,
  DecompositionFailed,
  EmptyBatch,
  NoTrainableDays,
  DegenerateDay,
  MissingPrice,
  PhaseCheckpointMissing,
  UnknownCommand,
  ConfigInvalid,
  UpstreamArtifactMissing,
  IoFailure,
};

const char* to_string(ErrorCode code) noexcept;

/// Whether the code describes bad input data (as opposed to a runtime fault).
bool is_data_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace estimate
