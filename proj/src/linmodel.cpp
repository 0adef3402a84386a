#include "wspice/linmodel.hpp"

#include <cmath>
#include <string>

#include "wspice/errors.hpp"

namespace wspice {

Dictionary::Dictionary(CMatrix B) : B_(std::move(B)) {
  const Index N = B_.rows();
  const Index M = B_.cols();
  if (N < 1 || M < 1) {
    throw Error(ErrorKind::DimensionMismatch, "dictionary must have at least one row and one column");
  }
  A_.resize(N, M + N);
  A_.leftCols(M) = B_;
  A_.rightCols(N).setIdentity();
  sq_norms_.resize(M + N);
  for (Index k = 0; k < M; ++k) {
    const double s = B_.col(k).squaredNorm();
    if (!(s > 0.0)) {
      throw Error(ErrorKind::ZeroColumn, "regressor column " + std::to_string(k) + " is zero", k);
    }
    sq_norms_[k] = s;
  }
  sq_norms_.tail(N).setOnes();
}

Dictionary build_dictionary(const CMatrix& B) { return Dictionary(B); }

PowerEstimate::PowerEstimate(RVector p, Index signals) : p_(std::move(p)), signals_(signals) {
  if (signals_ < 0 || signals_ > p_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "signal count exceeds power vector length");
  }
  for (Index k = 0; k < p_.size(); ++k) {
    if (!(p_[k] >= 0.0) || !std::isfinite(p_[k])) {
      throw Error(ErrorKind::DimensionMismatch, "power " + std::to_string(k) + " is negative or non-finite", k);
    }
  }
}

PowerEstimate PowerEstimate::floored(double floor) const {
  PowerEstimate out = *this;
  for (Index k = signals_; k < out.p_.size(); ++k) out.p_[k] = std::max(out.p_[k], floor);
  return out;
}

PowerEstimate PowerEstimate::scaled(double c) const {
  PowerEstimate out = *this;
  out.p_ *= c;
  return out;
}

SnapshotSet::SnapshotSet(CMatrix Y) : Y_(std::move(Y)) {
  if (Y_.rows() < 1 || Y_.cols() < 1) {
    throw Error(ErrorKind::DimensionMismatch, "snapshot matrix must be nonempty");
  }
  const double T = static_cast<double>(Y_.cols());
  sample_cov_ = CMatrix::Zero(Y_.rows(), Y_.rows());
  sample_cov_.selfadjointView<Eigen::Lower>().rankUpdate(Y_, 1.0 / T);
  sample_cov_ = sample_cov_.selfadjointView<Eigen::Lower>();
  energy_ = Y_.squaredNorm() / T;
}

CMatrix assemble_covariance(const Dictionary& dict, const PowerEstimate& p) {
  const Index N = dict.rows();
  const Index M = dict.signals();
  if (p.size() != M + N || p.signal_count() != M) {
    throw Error(ErrorKind::DimensionMismatch, "power vector does not match dictionary");
  }
  CMatrix scaled = dict.regressors() * p.signal().cwiseSqrt().asDiagonal();
  CMatrix R = CMatrix::Zero(N, N);
  R.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
  R.diagonal().real() += p.noise();
  return R.selfadjointView<Eigen::Lower>();
}

CovarianceFactor::CovarianceFactor(CMatrix R, double jitter)
    : R_(std::move(R)), llt_(R_), jitter_(jitter) {}

CMatrix CovarianceFactor::whiten(const CMatrix& rhs) const { return llt_.matrixL().solve(rhs); }

double CovarianceFactor::log_det() const {
  const auto& L = llt_.matrixLLT();
  double s = 0.0;
  for (Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i).real());
  return 2.0 * s;
}

namespace {

bool factor_ok(const Eigen::LLT<CMatrix>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const auto& L = llt.matrixLLT();
  for (Index i = 0; i < L.rows(); ++i) {
    const double v = L(i, i).real();
    if (!(v > 0.0) || !std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

CovarianceFactor factor_covariance(const Dictionary& dict, const PowerEstimate& p) {
  CMatrix R = assemble_covariance(dict, p);
  if (factor_ok(Eigen::LLT<CMatrix>(R))) return CovarianceFactor(std::move(R), 0.0);

  const Index N = R.rows();
  double base = R.diagonal().real().sum() / static_cast<double>(N);
  if (!(base > 0.0)) base = 1.0;
  double jitter = 1e-12 * base;
  for (int attempt = 0; attempt <= 8; ++attempt, jitter *= 2.0) {
    CMatrix Rj = R;
    Rj.diagonal().array() += jitter;
    if (factor_ok(Eigen::LLT<CMatrix>(Rj))) return CovarianceFactor(std::move(Rj), jitter);
  }
  throw Error(ErrorKind::NotPositiveDefinite, "covariance factorization failed after jitter retries");
}

namespace {

void check_dims(const CovarianceFactor& factor, const Dictionary& dict) {
  if (factor.dim() != dict.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "factor and dictionary row counts differ");
  }
}

RVector row_norms_of(const Dictionary& dict, const CMatrix& Z) {
  const Index M = dict.signals();
  RVector out(dict.atoms());
  out.head(M) = (dict.regressors().adjoint() * Z).rowwise().norm();
  out.tail(dict.rows()) = Z.rowwise().norm();
  return out;
}

}  // namespace

RVector covariance_row_norms(const CovarianceFactor& factor, const Dictionary& dict, const CMatrix& S) {
  check_dims(factor, dict);
  return row_norms_of(dict, factor.solve(S));
}

RVector gradient_magnitudes(const CovarianceFactor& factor, const Dictionary& dict, const SnapshotSet& data) {
  check_dims(factor, dict);
  if (data.rows() != dict.rows()) throw Error(ErrorKind::DimensionMismatch, "data rows differ from dictionary");
  if (!data.single()) return covariance_row_norms(factor, dict, data.sample_cov());
  const CVector z = factor.solve(CVector(data.y()));
  RVector out(dict.atoms());
  out.head(dict.signals()) = (dict.regressors().adjoint() * z).cwiseAbs();
  out.tail(dict.rows()) = z.cwiseAbs();
  return out;
}

RVector capon_denominators(const CovarianceFactor& factor, const Dictionary& dict) {
  check_dims(factor, dict);
  const Index N = dict.rows();
  RVector d(dict.atoms());
  d.head(dict.signals()) = factor.whiten(dict.regressors()).colwise().squaredNorm().transpose();
  d.tail(N) = factor.whiten(CMatrix::Identity(N, N)).colwise().squaredNorm().transpose();
  return d;
}

QuadForms quad_forms(const CovarianceFactor& factor, const Dictionary& dict, const SnapshotSet& data) {
  check_dims(factor, dict);
  if (data.rows() != dict.rows()) throw Error(ErrorKind::DimensionMismatch, "data rows differ from dictionary");
  QuadForms q;
  if (data.single()) {
    const CVector z = factor.solve(CVector(data.y()));
    q.g.resize(dict.atoms());
    q.g.head(dict.signals()) = dict.regressors().adjoint() * z;
    q.g.tail(dict.rows()) = z;
    q.g_mag = q.g.cwiseAbs();
  } else {
    q.g_mag = covariance_row_norms(factor, dict, data.sample_cov());
  }
  q.d = capon_denominators(factor, dict);
  return q;
}

double data_fit(const CovarianceFactor& factor, const SnapshotSet& data) {
  if (data.single()) {
    const CVector y = data.y();
    return y.dot(factor.solve(y)).real();
  }
  const CMatrix Z = factor.solve(data.sample_cov());
  return (data.sample_cov() * Z).trace().real();
}

}  // namespace wspice
