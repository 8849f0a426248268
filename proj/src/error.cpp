#include "harness/error.hpp"

namespace harness {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonStochastic: return "NonStochastic";
    case ErrorKind::RangeViolation: return "RangeViolation";
    case ErrorKind::EmptySupport: return "EmptySupport";
    case ErrorKind::InvalidRegion: return "InvalidRegion";
    case ErrorKind::MissingBoundary: return "MissingBoundary";
    case ErrorKind::ZeroInteriorMass: return "ZeroInteriorMass";
    case ErrorKind::InvalidWindow: return "InvalidWindow";
    case ErrorKind::InitialMismatch: return "InitialMismatch";
    case ErrorKind::OriginOutsideCarrier: return "OriginOutsideCarrier";
    case ErrorKind::AnchorOutsideCarrier: return "AnchorOutsideCarrier";
    case ErrorKind::WindowMismatch: return "WindowMismatch";
    case ErrorKind::StreamMismatch: return "StreamMismatch";
    case ErrorKind::TruncationTooSmall: return "TruncationTooSmall";
    case ErrorKind::AsymmetricKernel: return "AsymmetricKernel";
    case ErrorKind::SelfLoopKernel: return "SelfLoopKernel";
    case ErrorKind::NoEscape: return "NoEscape";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonNestedBoxes: return "NonNestedBoxes";
    case ErrorKind::NegativeRadicand: return "NegativeRadicand";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::NonPositiveData: return "NonPositiveData";
    case ErrorKind::UnknownExperiment: return "UnknownExperiment";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace harness
