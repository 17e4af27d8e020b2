#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace proxopt {

enum class ErrorKind {
  RankDeficient,
  AmbiguousProjection,
  NoConvergence,
  DescentViolation,
  MaxStepsExceeded,
  SingularJacobian,
  DivergenceDetected,
  IncompleteLedger,
  CannotEstimate,
  FallbackExhausted,
  DegenerateSpectrum,
  NoSampler,
  DerivativeMismatch,
  InvalidArgument,
};

inline constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::AmbiguousProjection: return "AmbiguousProjection";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::DescentViolation: return "DescentViolation";
    case ErrorKind::MaxStepsExceeded: return "MaxStepsExceeded";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::IncompleteLedger: return "IncompleteLedger";
    case ErrorKind::CannotEstimate: return "CannotEstimate";
    case ErrorKind::FallbackExhausted: return "FallbackExhausted";
    case ErrorKind::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorKind::NoSampler: return "NoSampler";
    case ErrorKind::DerivativeMismatch: return "DerivativeMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/**
 * Base exception for every failure raised by the library. The kind is
 * machine-readable; what() is prefixed with the kind name.
 */
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace proxopt
