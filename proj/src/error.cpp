#include "srf/error.hpp"

namespace srf {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFiniteCoordinate: return "NON_FINITE_COORDINATE";
    case ErrorCode::InconsistentJointCount: return "INCONSISTENT_JOINT_COUNT";
    case ErrorCode::TooFewFrames: return "TOO_FEW_FRAMES";
    case ErrorCode::TooFewJoints: return "TOO_FEW_JOINTS";
    case ErrorCode::BadDimension: return "BAD_DIMENSION";
    case ErrorCode::NonConsecutiveFrames: return "NON_CONSECUTIVE_FRAMES";
    case ErrorCode::MalformedRecord: return "MALFORMED_RECORD";
    case ErrorCode::DuplicateFrameIndex: return "DUPLICATE_FRAME_INDEX";
    case ErrorCode::InvalidSpec: return "INVALID_SPEC";
    case ErrorCode::NotSymmetric: return "NOT_SYMMETRIC";
    case ErrorCode::NegativeQuadraticForm: return "NEGATIVE_QUADRATIC_FORM";
    case ErrorCode::JointCountMismatch: return "JOINT_COUNT_MISMATCH";
    case ErrorCode::SequenceTooShort: return "SEQUENCE_TOO_SHORT";
    case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
    case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::LabelOutOfRange: return "LABEL_OUT_OF_RANGE";
    case ErrorCode::EmptyDataset: return "EMPTY_DATASET";
    case ErrorCode::SingleClass: return "SINGLE_CLASS";
    case ErrorCode::BadMagic: return "BAD_MAGIC";
    case ErrorCode::UnsupportedVersion: return "UNSUPPORTED_VERSION";
    case ErrorCode::CorruptPayload: return "CORRUPT_PAYLOAD";
    case ErrorCode::NoClassifiedFrames: return "NO_CLASSIFIED_FRAMES";
    case ErrorCode::TooFewSubjects: return "TOO_FEW_SUBJECTS";
    case ErrorCode::Io: return "IO_ERROR";
  }
  return "UNKNOWN";
}

bool is_validation_error(ErrorCode code) noexcept { return code != ErrorCode::Io; }

}  // namespace srf
