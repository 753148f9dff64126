#ifndef PRIMEQ_ERRORS_HPP
#define PRIMEQ_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace primeq {

/// Failure categories raised by the solver. Mathematical outcomes (blow-up,
/// non-contraction) are distinguished from operational ones so that drivers
/// can map them onto exit codes.
enum class ErrorKind {
  MeanNotFree,
  IncompatibleRhs,
  SingularStep,
  CflViolation,
  BlowupDetected,
  NoContraction,
  DegenerateRhs,
  ParseError,
  ValidationError,
  IoError,
  FormatError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MeanNotFree: return "MeanNotFree";
    case ErrorKind::IncompatibleRhs: return "IncompatibleRhs";
    case ErrorKind::SingularStep: return "SingularStep";
    case ErrorKind::CflViolation: return "CflViolation";
    case ErrorKind::BlowupDetected: return "BlowupDetected";
    case ErrorKind::NoContraction: return "NoContraction";
    case ErrorKind::DegenerateRhs: return "DegenerateRhs";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
  }
  return "Unknown";
}

class SolverError : public std::runtime_error {
 public:
  SolverError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace primeq

#endif  // PRIMEQ_ERRORS_HPP
