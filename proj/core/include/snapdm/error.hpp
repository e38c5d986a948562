#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace snapdm {

enum class ErrorKind {
  InvalidDataset,
  Io,
  MissingFile,
  MagicMismatch,
  VersionUnsupported,
  ShapeMismatch,
  AlphabetViolation,
  TruncatedBlob,
  DigestMismatch,
  InvalidConfig,
  InsufficientSamples,
  DimensionMismatch,
  DegenerateKernel,
  NumericalFailure,
  NoTransition,
  NonConvergence,
  UnstableDetection,
  AmbiguousClustering,
  RegionOutOfBounds,
  NoAtoms,
  EmptySeries,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Errors caused by numerics rather than by malformed input.
bool is_numerical(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace snapdm
