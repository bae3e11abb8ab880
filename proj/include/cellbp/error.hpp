#pragma once

#include <stdexcept>
#include <string>

namespace cellbp {

enum class ErrorKind {
  InvalidParams,
  InvalidArgument,
  NonFiniteLikelihood,
  MalformedObservation,
  TooLarge,
  NoEvents,
  DegenerateSample,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NonFiniteLikelihood: return "NonFiniteLikelihood";
    case ErrorKind::MalformedObservation: return "MalformedObservation";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::NoEvents: return "NoEvents";
    case ErrorKind::DegenerateSample: return "DegenerateSample";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cellbp
