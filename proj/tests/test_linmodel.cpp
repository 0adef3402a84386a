#include <doctest.h>

#include "reference.hpp"
#include "wspice/errors.hpp"
#include "wspice/linmodel.hpp"

using namespace wspice;

TEST_SUITE("linmodel") {

TEST_CASE("identity regressors give an all-ones norm vector") {
  const Dictionary dict(CMatrix::Identity(3, 3));
  CHECK(dict.rows() == 3);
  CHECK(dict.signals() == 3);
  CHECK(dict.atoms() == 6);
  CMatrix expected(3, 6);
  expected << CMatrix::Identity(3, 3), CMatrix::Identity(3, 3);
  CHECK(dict.augmented().isApprox(expected));
  CHECK(dict.column_sq_norms().isApprox(RVector::Ones(6)));
}

TEST_CASE("all-ones column has squared norm N") {
  const Dictionary dict = build_dictionary(CMatrix::Ones(3, 1));
  RVector expected(4);
  expected << 3, 1, 1, 1;
  CHECK(dict.column_sq_norms().isApprox(expected));
}

TEST_CASE("column norms match a brute-force sum of squared moduli") {
  const CMatrix B = ref::gaussian(4, 8, 11);
  const Dictionary dict(B);
  for (Index k = 0; k < 8; ++k) {
    double s = 0.0;
    for (Index i = 0; i < 4; ++i) s += std::norm(B(i, k));
    CHECK(dict.column_sq_norms()[k] == doctest::Approx(s).epsilon(1e-14));
  }
  CHECK(dict.column_sq_norms().tail(4).isApprox(RVector::Ones(4)));
}

TEST_CASE("zero columns and empty input are rejected") {
  CMatrix B = ref::gaussian(3, 4, 2);
  B.col(2).setZero();
  try {
    Dictionary d(B);
    FAIL("expected ZeroColumn");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroColumn);
    CHECK(e.index() == 2);
  }
  CHECK_THROWS_AS(Dictionary(CMatrix(0, 3)), Error);
}

TEST_CASE("power estimates reject negative entries and split into slices") {
  CHECK_THROWS_AS(PowerEstimate(RVector::Constant(4, -1.0), 2), Error);
  const PowerEstimate p(RVector::LinSpaced(5, 0.0, 4.0), 3);
  CHECK(p.signal_count() == 3);
  CHECK(p.noise_count() == 2);
  CHECK(p.noise()[0] == 3.0);
  const PowerEstimate f = PowerEstimate(RVector::Zero(5), 3).floored(0.5);
  CHECK(f.signal().isZero());
  CHECK(f.noise().isApprox(RVector::Constant(2, 0.5)));
  CHECK(p.scaled(2.0)[4] == 8.0);
}

TEST_CASE("identity dictionary with unit powers gives R = 2I") {
  const Dictionary dict(CMatrix::Identity(2, 2));
  const auto f = factor_covariance(dict, PowerEstimate(RVector::Ones(4), 2));
  CHECK(f.covariance().isApprox(2.0 * CMatrix::Identity(2, 2)));
  CHECK(f.jitter_applied() == 0.0);
}

TEST_CASE("pure-noise powers give sigma^2 I") {
  const Dictionary dict(ref::gaussian(3, 5, 4));
  RVector p = RVector::Zero(8);
  p.tail(3).setConstant(0.7);
  const auto f = factor_covariance(dict, PowerEstimate(p, 5));
  CHECK(f.covariance().isApprox(0.7 * CMatrix::Identity(3, 3)));
}

TEST_CASE("assembled covariance matches rank-one accumulation and is Hermitian") {
  const CMatrix B = ref::gaussian(3, 5, 5);
  const RVector p = ref::uniform_powers(8, 6);
  const CMatrix R = assemble_covariance(Dictionary(B), PowerEstimate(p, 5));
  CHECK(ref::rel_vec(R, ref::covariance(B, p)) < 1e-13);
  CHECK((R - R.adjoint()).norm() <= 1e-12 * R.norm());
}

TEST_CASE("singular covariance is regularized and the jitter recorded") {
  const Dictionary dict(ref::gaussian(4, 2, 8));
  RVector p = RVector::Zero(6);
  p.head(2).setConstant(1.0);
  const auto f = factor_covariance(dict, PowerEstimate(p, 2));
  CHECK(f.jitter_applied() > 0.0);
  const CVector y = ref::gaussian_vec(4, 9);
  const CVector z = f.solve(y);
  CHECK(z.allFinite());
}

TEST_CASE("solve reproduces its input on random instances") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dictionary dict(ref::gaussian(6, 12, seed));
    const auto f = factor_covariance(dict, PowerEstimate(ref::uniform_powers(18, seed + 100), 12));
    const CVector y = ref::gaussian_vec(6, seed + 200);
    CHECK(ref::rel_vec(CVector(f.covariance() * f.solve(y)), y) < 1e-8);
  }
}

TEST_CASE("log determinant matches the dense determinant") {
  const Dictionary dict(ref::gaussian(4, 6, 3));
  const auto f = factor_covariance(dict, PowerEstimate(ref::uniform_powers(10, 4), 6));
  CHECK(f.log_det() == doctest::Approx(std::log(std::abs(f.covariance().determinant()))).epsilon(1e-12));
}

TEST_CASE("quadratic forms at R = I") {
  CMatrix B = CMatrix::Zero(3, 1);
  B(0, 0) = 1.0;
  const Dictionary dict(B);
  RVector p = RVector::Zero(4);
  p.tail(3).setOnes();
  CVector y = CVector::Zero(3);
  y[0] = 2.0;
  const auto q = quad_forms(factor_covariance(dict, PowerEstimate(p, 1)), dict, SnapshotSet(y));
  CHECK(q.g[0].real() == doctest::Approx(2.0));
  CHECK(q.g_mag[0] == doctest::Approx(2.0));
  CHECK(q.d[0] == doctest::Approx(1.0));
}

TEST_CASE("scalar covariance cI gives d_k = ||a_k||^2 / c") {
  const Dictionary dict(ref::gaussian(3, 4, 12));
  RVector p = RVector::Zero(7);
  p.tail(3).setConstant(2.5);
  const auto d = capon_denominators(factor_covariance(dict, PowerEstimate(p, 4)), dict);
  CHECK(ref::rel_vec(d, RVector(dict.column_sq_norms() / 2.5)) < 1e-13);
}

TEST_CASE("quadratic forms match the explicit inverse") {
  const CMatrix B = ref::gaussian(3, 5, 21);
  const RVector p = ref::uniform_powers(8, 22);
  const CVector y = ref::gaussian_vec(3, 23);
  const Dictionary dict(B);
  const auto f = factor_covariance(dict, PowerEstimate(p, 5));
  const auto q = quad_forms(f, dict, SnapshotSet(y));
  CHECK(ref::rel_vec(q.g, ref::g(B, p, y)) < 1e-12);
  CHECK(ref::rel_vec(q.d, ref::d(B, p)) < 1e-12);
  CHECK((q.d.array() > 0.0).all());
  CHECK(data_fit(f, SnapshotSet(y)) == doctest::Approx(ref::fit(B, p, y)).epsilon(1e-12));
  CHECK(ref::rel_vec(gradient_magnitudes(f, dict, SnapshotSet(y)), q.g_mag) < 1e-15);
}

TEST_CASE("multisnapshot row norms reduce to |g_k| ||y|| for one snapshot") {
  const CMatrix B = ref::gaussian(4, 7, 31);
  const Dictionary dict(B);
  const auto f = factor_covariance(dict, PowerEstimate(ref::uniform_powers(11, 32), 7));
  const CVector y = ref::gaussian_vec(4, 33);
  const SnapshotSet one(y);
  const RVector rows = covariance_row_norms(f, dict, one.sample_cov());
  const RVector g = gradient_magnitudes(f, dict, one);
  CHECK(ref::rel_vec(rows, RVector(g * y.norm())) < 1e-12);
}

TEST_CASE("multisnapshot data fit is tr{Rbar R^-1 Rbar}") {
  const CMatrix B = ref::gaussian(3, 4, 41);
  const RVector p = ref::uniform_powers(7, 42);
  const CMatrix Y = ref::gaussian(3, 5, 43);
  const SnapshotSet data(Y);
  const CMatrix Rbar = Y * Y.adjoint() / 5.0;
  CHECK(ref::rel_vec(data.sample_cov(), Rbar) < 1e-14);
  CHECK(data.energy() == doctest::Approx(Rbar.trace().real()));
  const auto f = factor_covariance(Dictionary(B), PowerEstimate(p, 4));
  const double expected = (Rbar * ref::inverse(ref::covariance(B, p)) * Rbar).trace().real();
  CHECK(data_fit(f, data) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("single snapshot sample covariance is y y* and sets the noise floor") {
  const CVector y = ref::gaussian_vec(5, 51);
  const SnapshotSet data(y);
  CHECK(data.single());
  CHECK(ref::rel_vec(data.sample_cov(), CMatrix(y * y.adjoint())) < 1e-15);
  CHECK(data.noise_floor() == doctest::Approx(1e-12 * y.squaredNorm() / 5.0));
}

}
