// Error codes and the exception type used across the library. Codes have
// stable UPPER_SNAKE names because the CLI emits them in machine-readable
// error JSON.
#pragma once

#include <stdexcept>
#include <string>

namespace protolens {

enum class ErrorCode {
  MalformedCsv,
  UnknownLabelColumn,
  EmptyDataset,
  ClassTooSmall,
  InvalidParams,
  DimensionMismatch,
  VersionMismatch,
  CorruptPayload,
  TooManyFeatures,
  EmptyBackground,
  LengthMismatch,
  IndexOutOfRange,
  EmptyPrototypeSet,
  MTooLarge,
  EmptyTestSet,
  DegenerateClass,
  AllZeroDifferences,
  EmptyInput,
  UnknownInstanceId,
  DatasetNotFound,
  ArtifactNotFound,
  ConfigInvalid,
  IoError,
  Internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace protolens
