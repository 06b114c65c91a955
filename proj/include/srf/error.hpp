#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace srf {

enum class ErrorCode {
  // skeleton data
  NonFiniteCoordinate,
  InconsistentJointCount,
  TooFewFrames,
  TooFewJoints,
  BadDimension,
  NonConsecutiveFrames,
  MalformedRecord,
  DuplicateFrameIndex,
  InvalidSpec,
  // numeric core
  NotSymmetric,
  NegativeQuadraticForm,
  JointCountMismatch,
  SequenceTooShort,
  InvalidConfig,
  // network
  ShapeMismatch,
  LabelOutOfRange,
  EmptyDataset,
  SingleClass,
  BadMagic,
  UnsupportedVersion,
  CorruptPayload,
  // online / evaluation
  NoClassifiedFrames,
  TooFewSubjects,
  // I/O
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for errors caused by bad input data rather than the environment.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Error with a 1-based line number, raised while parsing JSONL.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t line, const std::string& what)
      : Error(code, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace srf
