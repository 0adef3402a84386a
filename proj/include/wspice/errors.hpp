#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wspice {

enum class ErrorKind {
  ZeroColumn,
  DimensionMismatch,
  NotPositiveDefinite,
  ZeroData,
  NonpositiveWeight,
  ConfigError,
  LogOfZero,
  RankDeficientSupport,
  NotConverged,
  Cancelled,
  MalformedInput,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` discriminates the failure
/// and `index()` carries the offending column/entry when one applies.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::ptrdiff_t index = -1)
      : std::runtime_error(what), kind_(kind), index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  ErrorKind kind_;
  std::ptrdiff_t index_;
};

}  // namespace wspice
