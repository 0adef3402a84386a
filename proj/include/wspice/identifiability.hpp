#pragma once

// Uniqueness of the parameterization R = A diag(p) A*: a second description
// exists iff some real q != 0 has (conj(A) ⊙ A) q = 0 and p + εq >= 0.

#include <cstdint>
#include <optional>
#include <string>

#include "wspice/linmodel.hpp"

namespace wspice {

enum class Verdict { Unique, GenericallyUnique, NotUnique, Indeterminate };

std::string verdict_name(Verdict v);

struct UniquenessReport {
  Verdict verdict = Verdict::Indeterminate;
  /// Rank of conj(A) ⊙ A.
  Index kr_rank = 0;
  /// M + N < N².
  bool threshold_check = false;
  /// Real q with (conj(A) ⊙ A) q ≈ 0 and p + εq >= 0, normalized to ‖q‖∞ = 1.
  std::optional<RVector> witness;
  /// N-column subsets sampled for the M < N rule.
  int subsets_tested = 0;
  /// Free-form reason for the verdict.
  std::string rationale;
};

/// Column k is conj(a_k) ⊗ a_k = vec(a_k a_k*), N² x (M+N).
CMatrix khatri_rao(const Dictionary& dict);
CMatrix khatri_rao(const CMatrix& A);

/// Rank over the reals (real combinations of columns, as for the witness q), with
/// singular values below 1e-10 * σ_max treated as zero.
Index numerical_rank(const CMatrix& m);

/// Samples `subsets` random N-column subsets for the M < N rule using `seed`.
UniquenessReport classify_uniqueness(const Dictionary& dict, const std::optional<PowerEstimate>& p,
                                     std::uint64_t seed = 0, int subsets = 100);

}  // namespace wspice
