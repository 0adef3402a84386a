#pragma once

#include <vector>

#include "wspice/linmodel.hpp"

namespace wspice {

/// Sorted, distinct, 0-based indices into the signal slice.
class SupportSet {
 public:
  SupportSet() = default;
  /// Sorts and validates; throws DimensionMismatch on duplicates or indices outside [0, signals).
  SupportSet(std::vector<Index> indices, Index signals);

  const std::vector<Index>& indices() const { return indices_; }
  Index size() const { return static_cast<Index>(indices_.size()); }
  bool operator==(const SupportSet&) const = default;

 private:
  std::vector<Index> indices_;
};

enum class AmplitudeMethod { Lmmse, Capon, LsRefit };

struct AmplitudeEstimate {
  /// M x T, one column per snapshot.
  CMatrix x;
  AmplitudeMethod method = AmplitudeMethod::Lmmse;
  /// Populated for LsRefit only.
  SupportSet support;

  CVector first() const { return x.col(0); }
};

/// x_k = p_k a_k* R^{-1} y.
AmplitudeEstimate lmmse_amplitudes(const Dictionary& dict, const SnapshotSet& data, const PowerEstimate& p);
/// x_k = a_k* R^{-1} y / a_k* R^{-1} a_k.
AmplitudeEstimate capon_amplitudes(const Dictionary& dict, const SnapshotSet& data, const PowerEstimate& p);
/// Least squares on the columns in `support`, zero elsewhere. Throws RankDeficientSupport.
AmplitudeEstimate ls_refit(const Dictionary& dict, const SnapshotSet& data, const SupportSet& support);

enum class PeakMode { TopValues, LocalPeaks };

/// K largest signal powers, or the K largest strict local maxima over the grid
/// (padded with the largest remaining values). Ties go to the lower index.
SupportSet top_k_support(const PowerEstimate& p, Index K, PeakMode mode);
SupportSet top_k_support(const RVector& signal_powers, Index K, PeakMode mode);

}  // namespace wspice
