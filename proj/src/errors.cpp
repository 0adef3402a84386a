#include "wspice/errors.hpp"

namespace wspice {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroColumn: return "ZeroColumn";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::ZeroData: return "ZeroData";
    case ErrorKind::NonpositiveWeight: return "NonpositiveWeight";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::LogOfZero: return "LogOfZero";
    case ErrorKind::RankDeficientSupport: return "RankDeficientSupport";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::Cancelled: return "Cancelled";
    case ErrorKind::MalformedInput: return "MalformedInput";
  }
  return "Unknown";
}

}  // namespace wspice
