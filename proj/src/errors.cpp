#include "protolens/errors.hpp"

namespace protolens {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedCsv: return "MALFORMED_CSV";
    case ErrorCode::UnknownLabelColumn: return "UNKNOWN_LABEL_COLUMN";
    case ErrorCode::EmptyDataset: return "EMPTY_DATASET";
    case ErrorCode::ClassTooSmall: return "CLASS_TOO_SMALL";
    case ErrorCode::InvalidParams: return "INVALID_PARAMS";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::VersionMismatch: return "VERSION_MISMATCH";
    case ErrorCode::CorruptPayload: return "CORRUPT_PAYLOAD";
    case ErrorCode::TooManyFeatures: return "TOO_MANY_FEATURES";
    case ErrorCode::EmptyBackground: return "EMPTY_BACKGROUND";
    case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::IndexOutOfRange: return "INDEX_OUT_OF_RANGE";
    case ErrorCode::EmptyPrototypeSet: return "EMPTY_PROTOTYPE_SET";
    case ErrorCode::MTooLarge: return "M_TOO_LARGE";
    case ErrorCode::EmptyTestSet: return "EMPTY_TEST_SET";
    case ErrorCode::DegenerateClass: return "DEGENERATE_CLASS";
    case ErrorCode::AllZeroDifferences: return "ALL_ZERO_DIFFERENCES";
    case ErrorCode::EmptyInput: return "EMPTY_INPUT";
    case ErrorCode::UnknownInstanceId: return "UNKNOWN_INSTANCE_ID";
    case ErrorCode::DatasetNotFound: return "DATASET_NOT_FOUND";
    case ErrorCode::ArtifactNotFound: return "ARTIFACT_NOT_FOUND";
    case ErrorCode::ConfigInvalid: return "CONFIG_INVALID";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::Internal: return "INTERNAL";
  }
  return "UNKNOWN";
}

}  // namespace protolens
