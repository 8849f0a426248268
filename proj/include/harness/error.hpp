#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace harness {

enum class ErrorKind {
  NonStochastic,
  RangeViolation,
  EmptySupport,
  InvalidRegion,
  MissingBoundary,
  ZeroInteriorMass,
  InvalidWindow,
  InitialMismatch,
  OriginOutsideCarrier,
  AnchorOutsideCarrier,
  WindowMismatch,
  StreamMismatch,
  TruncationTooSmall,
  AsymmetricKernel,
  SelfLoopKernel,
  NoEscape,
  DimensionMismatch,
  NonNestedBoxes,
  NegativeRadicand,
  TooFewSamples,
  TooFewPoints,
  NonPositiveData,
  UnknownExperiment,
  SchemaError,
  ParseError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace harness
