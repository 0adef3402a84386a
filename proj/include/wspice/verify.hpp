#pragma once

// Self-check battery: runs the estimators against the convex oracles and the
// algebraic identities they must satisfy on small random regression instances.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wspice/linmodel.hpp"

namespace wspice {

struct VerifyOptions {
  std::uint64_t seed = 1;
  Index n = 8;
  Index m = 20;
  int instances = 6;
};

struct CheckResult {
  std::string name;
  /// The relation being tested, written out as a formula.
  std::string relation;
  bool passed = false;
  /// Largest observed violation measure (relative unless stated in detail).
  double worst = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

std::vector<CheckResult> run_verify(const VerifyOptions& options);

/// One line per check; failing checks get the relation on a second line.
void print_checks(std::ostream& out, const std::vector<CheckResult>& checks);

}  // namespace wspice
