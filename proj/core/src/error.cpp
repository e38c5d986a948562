#include "snapdm/error.hpp"

namespace snapdm {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidDataset: return "InvalidDataset";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::MagicMismatch: return "MagicMismatch";
    case ErrorKind::VersionUnsupported: return "VersionUnsupported";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::AlphabetViolation: return "AlphabetViolation";
    case ErrorKind::TruncatedBlob: return "TruncatedBlob";
    case ErrorKind::DigestMismatch: return "DigestMismatch";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateKernel: return "DegenerateKernel";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::NoTransition: return "NoTransition";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::UnstableDetection: return "UnstableDetection";
    case ErrorKind::AmbiguousClustering: return "AmbiguousClustering";
    case ErrorKind::RegionOutOfBounds: return "RegionOutOfBounds";
    case ErrorKind::NoAtoms: return "NoAtoms";
    case ErrorKind::EmptySeries: return "EmptySeries";
  }
  return "Unknown";
}

bool is_numerical(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DegenerateKernel:
    case ErrorKind::NumericalFailure:
    case ErrorKind::NoTransition:
    case ErrorKind::NonConvergence:
    case ErrorKind::UnstableDetection:
    case ErrorKind::AmbiguousClustering:
      return true;
    default:
      return false;
  }
}

}  // namespace snapdm
