#include "wspice/amplitude.hpp"

#include <algorithm>
#include <numeric>

#include <Eigen/QR>

#include "wspice/errors.hpp"

namespace wspice {

SupportSet::SupportSet(std::vector<Index> indices, Index signals) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end()) {
    throw Error(ErrorKind::DimensionMismatch, "support indices must be distinct");
  }
  for (Index k : indices_) {
    if (k < 0 || k >= signals) throw Error(ErrorKind::DimensionMismatch, "support index out of range", k);
  }
}

namespace {

void check(const Dictionary& dict, const SnapshotSet& data, const PowerEstimate& p) {
  if (data.rows() != dict.rows() || p.size() != dict.atoms() || p.signal_count() != dict.signals()) {
    throw Error(ErrorKind::DimensionMismatch, "amplitude inputs have inconsistent dimensions");
  }
}

}  // namespace

AmplitudeEstimate lmmse_amplitudes(const Dictionary& dict, const SnapshotSet& data, const PowerEstimate& p) {
  check(dict, data, p);
  const CovarianceFactor factor = factor_covariance(dict, p);
  AmplitudeEstimate out;
  out.method = AmplitudeMethod::Lmmse;
  out.x = p.signal().asDiagonal() * (dict.regressors().adjoint() * factor.solve(data.data()));
  return out;
}

AmplitudeEstimate capon_amplitudes(const Dictionary& dict, const SnapshotSet& data, const PowerEstimate& p) {
  check(dict, data, p);
  const CovarianceFactor factor = factor_covariance(dict, p);
  const RVector d = factor.whiten(dict.regressors()).colwise().squaredNorm().transpose();
  AmplitudeEstimate out;
  out.method = AmplitudeMethod::Capon;
  out.x = d.cwiseInverse().asDiagonal() * (dict.regressors().adjoint() * factor.solve(data.data()));
  return out;
}

AmplitudeEstimate ls_refit(const Dictionary& dict, const SnapshotSet& data, const SupportSet& support) {
  if (data.rows() != dict.rows()) throw Error(ErrorKind::DimensionMismatch, "data rows differ from dictionary");
  const Index K = support.size();
  AmplitudeEstimate out;
  out.method = AmplitudeMethod::LsRefit;
  out.support = support;
  out.x = CMatrix::Zero(dict.signals(), data.snapshots());
  if (K == 0) return out;
  if (K > dict.rows()) throw Error(ErrorKind::RankDeficientSupport, "support larger than the number of samples");
  for (Index k : support.indices()) {
    if (k >= dict.signals()) throw Error(ErrorKind::DimensionMismatch, "support index out of range", k);
  }

  CMatrix Bs(dict.rows(), K);
  for (Index j = 0; j < K; ++j) Bs.col(j) = dict.regressors().col(support.indices()[j]);
  Eigen::ColPivHouseholderQR<CMatrix> qr(Bs);
  qr.setThreshold(1e-10);
  if (qr.rank() < K) throw Error(ErrorKind::RankDeficientSupport, "selected columns are linearly dependent");
  const CMatrix xs = qr.solve(data.data());
  for (Index j = 0; j < K; ++j) out.x.row(support.indices()[j]) = xs.row(j);
  return out;
}

SupportSet top_k_support(const RVector& v, Index K, PeakMode mode) {
  const Index M = v.size();
  if (K < 1 || K > M) throw Error(ErrorKind::ConfigError, "K must lie in [1, M]");

  std::vector<Index> order(static_cast<std::size_t>(M));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v[a] > v[b]; });

  std::vector<Index> chosen;
  if (mode == PeakMode::LocalPeaks) {
    auto is_peak = [&](Index k) {
      const bool left = k == 0 || v[k] > v[k - 1];
      const bool right = k == M - 1 || v[k] > v[k + 1];
      return left && right;
    };
    for (Index k : order) {
      if (static_cast<Index>(chosen.size()) == K) break;
      if (is_peak(k)) chosen.push_back(k);
    }
  }
  for (Index k : order) {
    if (static_cast<Index>(chosen.size()) == K) break;
    if (std::find(chosen.begin(), chosen.end(), k) == chosen.end()) chosen.push_back(k);
  }
  return SupportSet(std::move(chosen), M);
}

SupportSet top_k_support(const PowerEstimate& p, Index K, PeakMode mode) {
  return top_k_support(RVector(p.signal()), K, mode);
}

}  // namespace wspice
