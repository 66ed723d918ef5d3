#include "sancdifi/error.hpp"

namespace sancdifi {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::DimensionMismatch: return "dimension_mismatch";
    case ErrorKind::Io: return "io";
    case ErrorKind::BadMagic: return "bad_magic";
    case ErrorKind::BadVersion: return "bad_version";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::TrainingDiverged: return "training_diverged";
    case ErrorKind::TrojanQuality: return "trojan_quality";
    case ErrorKind::ClassOutOfRange: return "class_out_of_range";
    case ErrorKind::GradientUnavailable: return "gradient_unavailable";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

}  // namespace sancdifi
