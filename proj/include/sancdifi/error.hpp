#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sancdifi {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  Io,
  BadMagic,
  BadVersion,
  Truncated,
  TrainingDiverged,
  TrojanQuality,
  ClassOutOfRange,
  GradientUnavailable,
  Config,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Carries the per-epoch losses recorded up to the point of divergence.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& message, std::vector<double> trace)
      : Error(ErrorKind::TrainingDiverged, message), loss_trace_(std::move(trace)) {}

  const std::vector<double>& loss_trace() const noexcept { return loss_trace_; }

 private:
  std::vector<double> loss_trace_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace sancdifi
