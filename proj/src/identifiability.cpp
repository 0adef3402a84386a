#include "wspice/identifiability.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/SVD>

#include "wspice/errors.hpp"

namespace wspice {

namespace {

constexpr double kRankTol = 1e-10;

// Hermitian matrices are a real form of C^{NxN}, so the rank over R of the
// stacked [Re; Im] equals the complex rank, and its null space holds real q.
RMatrix stack_real(const CMatrix& m) {
  RMatrix out(2 * m.rows(), m.cols());
  out.topRows(m.rows()) = m.real();
  out.bottomRows(m.rows()) = m.imag();
  return out;
}

struct NullSpace {
  Index rank = 0;
  RMatrix basis;  // columns span the numerical null space
};

NullSpace null_space(const RMatrix& m) {
  NullSpace ns;
  if (m.cols() == 0) return ns;
  Eigen::BDCSVD<RMatrix> svd(m, Eigen::ComputeFullV);
  const RVector& s = svd.singularValues();
  const double cut = s.size() > 0 ? kRankTol * s[0] : 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s[i] > cut) ++ns.rank;
  }
  ns.basis = svd.matrixV().rightCols(m.cols() - ns.rank);
  return ns;
}

Index complex_rank(const CMatrix& m) {
  if (m.cols() == 0) return 0;
  const RVector s = Eigen::BDCSVD<CMatrix>(m).singularValues();
  return static_cast<Index>((s.array() > kRankTol * s[0]).count());
}

RVector normalized(RVector q) {
  Index at = 0;
  q.cwiseAbs().maxCoeff(&at);
  return q / q[at];
}

bool admissible(const RVector& q, const PowerEstimate& p, const RMatrix& kr_real) {
  if (q.size() != p.size() || !(q.norm() > 0.0)) return false;
  if ((kr_real * q).norm() > 1e-8 * q.norm()) return false;
  double min_pos = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) min_pos = std::min(min_pos, p[k]);
  }
  if (!std::isfinite(min_pos)) return false;
  const double eps = 1e-6 * min_pos / q.cwiseAbs().maxCoeff();
  for (Index k = 0; k < p.size(); ++k) {
    if (p[k] + eps * q[k] < 0.0) return false;
  }
  return true;
}

std::optional<RVector> find_witness(const RMatrix& kr_real, const PowerEstimate& p) {
  // Null vector restricted to the support of p, padded with zeros.
  std::vector<Index> support;
  for (Index k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) support.push_back(k);
  }
  RMatrix restricted(kr_real.rows(), static_cast<Index>(support.size()));
  for (std::size_t j = 0; j < support.size(); ++j) restricted.col(static_cast<Index>(j)) = kr_real.col(support[j]);
  const NullSpace local = null_space(restricted);
  if (local.basis.cols() > 0) {
    RVector q = RVector::Zero(p.size());
    for (std::size_t j = 0; j < support.size(); ++j) q[support[j]] = local.basis(static_cast<Index>(j), 0);
    q = normalized(q);
    if (admissible(q, p, kr_real)) return q;
  }
  // Otherwise any basis vector whose entries off the support share one sign.
  const NullSpace full = null_space(kr_real);
  for (Index j = 0; j < full.basis.cols(); ++j) {
    for (double sign : {1.0, -1.0}) {
      RVector q = sign * full.basis.col(j);
      q /= q.cwiseAbs().maxCoeff();
      if (admissible(q, p, kr_real)) return q;
    }
  }
  return std::nullopt;
}

}  // namespace

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Unique: return "Unique";
    case Verdict::GenericallyUnique: return "GenericallyUnique";
    case Verdict::NotUnique: return "NotUnique";
    case Verdict::Indeterminate: return "Indeterminate";
  }
  return "Unknown";
}

CMatrix khatri_rao(const CMatrix& A) {
  const Index N = A.rows();
  CMatrix out(N * N, A.cols());
  for (Index k = 0; k < A.cols(); ++k) {
    for (Index j = 0; j < N; ++j) {
      out.col(k).segment(j * N, N) = std::conj(A(j, k)) * A.col(k);
    }
  }
  return out;
}

CMatrix khatri_rao(const Dictionary& dict) { return khatri_rao(dict.augmented()); }

Index numerical_rank(const CMatrix& m) { return null_space(stack_real(m)).rank; }

UniquenessReport classify_uniqueness(const Dictionary& dict, const std::optional<PowerEstimate>& p,
                                     std::uint64_t seed, int subsets) {
  const Index N = dict.rows();
  const Index M = dict.signals();
  const Index cols = M + N;
  if (p && (p->size() != cols || p->signal_count() != M)) {
    throw Error(ErrorKind::DimensionMismatch, "power vector does not match dictionary");
  }

  const RMatrix kr_real = stack_real(khatri_rao(dict));
  UniquenessReport report;
  report.kr_rank = null_space(kr_real).rank;
  report.threshold_check = cols < N * N;

  if (report.kr_rank == cols) {
    if (M < N) {
      std::mt19937_64 rng(seed);
      std::vector<Index> all(static_cast<std::size_t>(cols));
      std::iota(all.begin(), all.end(), Index{0});
      std::vector<Index> pick;
      CMatrix sub(N, N);
      for (int t = 0; t < subsets; ++t) {
        pick.clear();
        std::sample(all.begin(), all.end(), std::back_inserter(pick), N, rng);
        for (Index j = 0; j < N; ++j) sub.col(j) = dict.augmented().col(pick[static_cast<std::size_t>(j)]);
        ++report.subsets_tested;
        if (complex_rank(sub) < N) {
          report.verdict = Verdict::Indeterminate;
          report.rationale = "M < N but a sampled N-column subset of A is rank deficient";
          return report;
        }
      }
      report.verdict = Verdict::Unique;
      report.rationale = "M < N, sampled N-column subsets of A are full rank and the Khatri-Rao matrix has full column rank";
      return report;
    }
    report.verdict = Verdict::GenericallyUnique;
    report.rationale = "Khatri-Rao matrix has full column rank M+N";
    return report;
  }

  if (!p) {
    report.verdict = Verdict::Indeterminate;
    report.rationale = "Khatri-Rao null space is nontrivial; no power vector supplied to test";
    return report;
  }
  report.witness = find_witness(kr_real, *p);
  if (report.witness) {
    report.verdict = Verdict::NotUnique;
    report.rationale = "null-space vector q keeps p + eps*q nonnegative";
  } else {
    report.verdict = Verdict::Indeterminate;
    report.rationale = "Khatri-Rao null space is nontrivial but no admissible witness was found";
  }
  return report;
}

}  // namespace wspice
