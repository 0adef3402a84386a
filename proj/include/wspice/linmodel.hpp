#pragma once

// Data model for y = Bx + e with the augmented covariance parameterization
// R(p) = A diag(p) A*, A = [B | I_N], plus the Hermitian-PD kernels shared by
// every estimator.

#include <complex>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace wspice {

using Index = Eigen::Index;
using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Relative scale of the noise-slice floor: floor = kNoiseFloorScale * tr(Rbar) / N.
inline constexpr double kNoiseFloorScale = 1e-12;

class Dictionary {
 public:
  /// Throws ZeroColumn or DimensionMismatch.
  explicit Dictionary(CMatrix B);

  Index rows() const { return B_.rows(); }        // N
  Index signals() const { return B_.cols(); }     // M
  Index atoms() const { return A_.cols(); }       // M + N

  const CMatrix& regressors() const { return B_; }
  const CMatrix& augmented() const { return A_; }
  /// ‖a_k‖² for every column of A; the trailing N entries are 1.
  const RVector& column_sq_norms() const { return sq_norms_; }

 private:
  CMatrix B_;
  CMatrix A_;
  RVector sq_norms_;
};

Dictionary build_dictionary(const CMatrix& B);

/// Nonnegative powers over the M signal atoms followed by the N noise atoms.
class PowerEstimate {
 public:
  PowerEstimate() = default;
  PowerEstimate(RVector p, Index signals);

  Index size() const { return p_.size(); }
  Index signal_count() const { return signals_; }
  Index noise_count() const { return p_.size() - signals_; }

  const RVector& values() const { return p_; }
  double operator[](Index k) const { return p_[k]; }
  auto signal() const { return p_.head(signals_); }
  auto noise() const { return p_.tail(p_.size() - signals_); }

  /// Copy with every noise entry raised to at least `floor`.
  PowerEstimate floored(double floor) const;
  PowerEstimate scaled(double c) const;

 private:
  RVector p_;
  Index signals_ = 0;
};

class SnapshotSet {
 public:
  /// Y is N x T with T >= 1.
  explicit SnapshotSet(CMatrix Y);

  Index rows() const { return Y_.rows(); }
  Index snapshots() const { return Y_.cols(); }
  bool single() const { return Y_.cols() == 1; }

  const CMatrix& data() const { return Y_; }
  auto y() const { return Y_.col(0); }
  /// (1/T) Σ y_t y_t*.
  const CMatrix& sample_cov() const { return sample_cov_; }
  /// tr(Rbar); equals ‖y‖² for a single snapshot.
  double energy() const { return energy_; }
  double noise_floor() const { return kNoiseFloorScale * energy_ / static_cast<double>(rows()); }

 private:
  CMatrix Y_;
  CMatrix sample_cov_;
  double energy_ = 0.0;
};

CMatrix assemble_covariance(const Dictionary& dict, const PowerEstimate& p);

class CovarianceFactor {
 public:
  CovarianceFactor(CMatrix R, double jitter);

  Index dim() const { return R_.rows(); }
  const CMatrix& covariance() const { return R_; }
  double jitter_applied() const { return jitter_; }

  CMatrix solve(const CMatrix& rhs) const { return llt_.solve(rhs); }
  CVector solve(const CVector& rhs) const { return llt_.solve(rhs); }
  /// L^{-1} rhs for R = L L*; quadratic forms reduce to squared column norms.
  CMatrix whiten(const CMatrix& rhs) const;
  double log_det() const;

 private:
  CMatrix R_;
  Eigen::LLT<CMatrix> llt_;
  double jitter_ = 0.0;
};

/// Cholesky of R(p). On failure retries with jitter 1e-12 tr(R)/N, doubling up
/// to 8 times; throws NotPositiveDefinite when all attempts fail.
CovarianceFactor factor_covariance(const Dictionary& dict, const PowerEstimate& p);

struct QuadForms {
  /// a_k* R^{-1} y; empty when T > 1.
  CVector g;
  /// |g_k| for T = 1, ‖a_k* R^{-1} Rbar‖₂ for T > 1.
  RVector g_mag;
  /// Re{a_k* R^{-1} a_k}.
  RVector d;
};

QuadForms quad_forms(const CovarianceFactor& factor, const Dictionary& dict, const SnapshotSet& data);

/// The g_mag part of quad_forms alone (one solve for T = 1).
RVector gradient_magnitudes(const CovarianceFactor& factor, const Dictionary& dict, const SnapshotSet& data);
/// The d part of quad_forms alone.
RVector capon_denominators(const CovarianceFactor& factor, const Dictionary& dict);
/// ‖a_k* R^{-1} S‖₂ for an arbitrary Hermitian S, independent of the snapshot count.
RVector covariance_row_norms(const CovarianceFactor& factor, const Dictionary& dict, const CMatrix& S);

/// y* R^{-1} y for T = 1, tr{Rbar R^{-1} Rbar} otherwise.
double data_fit(const CovarianceFactor& factor, const SnapshotSet& data);

}  // namespace wspice
