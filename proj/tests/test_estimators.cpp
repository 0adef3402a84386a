#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "reference.hpp"
#include "wspice/errors.hpp"
#include "wspice/estimators.hpp"
#include "wspice/experiments.hpp"

using namespace wspice;

namespace {

Instance instance(Index N, Index M, std::vector<Index> support, std::vector<double> powers, double snr_db,
                  std::uint64_t seed, int trial = 0) {
  ExperimentSpec spec;
  spec.N = N;
  spec.M = M;
  spec.support = std::move(support);
  spec.powers = std::move(powers);
  spec.snr_db = snr_db;
  spec.seed = seed;
  spec.algorithms = default_algorithms();
  return gen_iid_instance(spec, trial);
}

Instance small(std::uint64_t seed, double snr_db = 15.0) { return instance(8, 20, {3, 9, 15}, {1, 9, 4}, snr_db, seed); }

EstimatorConfig config(WeightPolicy policy, StepRule step, double tol = 1e-3, int max_iters = 1000) {
  EstimatorConfig c;
  c.policy = policy;
  c.step = step;
  c.tol = tol;
  c.max_iters = max_iters;
  return c;
}

EstimationTrace run(const Instance& inst, const EstimatorConfig& c) {
  if (std::holds_alternative<LikesPolicy>(c.policy)) return estimate_likes_from_spice(inst.dict, inst.data, c);
  return estimate(inst.dict, inst.data, c);
}

double worst_increase(const std::vector<double>& v) {
  double worst = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) break;
    worst = std::max(worst, (v[i] - v[i - 1]) / std::max(std::abs(v[i - 1]), 1e-300));
  }
  return worst;
}

const WeightPolicy kPolicies[] = {SpicePolicy{}, LikesPolicy{}, SlimPolicy{}, IaaPolicy{}};
const StepRule kSteps[] = {StepRule::VersionA, StepRule::VersionB};

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("policy and step names round-trip") {
  for (const auto& p : kPolicies) CHECK(policy_name(policy_from_name(policy_name(p))) == policy_name(p));
  CHECK(step_from_name("b") == StepRule::VersionB);
  CHECK_THROWS_AS(policy_from_name("focuss"), Error);
  CHECK_THROWS_AS(step_from_name("c"), Error);
  CHECK(std::get<LikesPolicy>(policy_from_name("likes")).refresh_period == 30);
  CHECK(std::get<SlimPolicy>(policy_from_name("slim")).max_iters == 5);
}

TEST_CASE("matched filter on an isolated unit column") {
  const Dictionary dict(CMatrix::Identity(3, 3));
  CVector y = CVector::Zero(3);
  y[0] = 1.0;
  const SnapshotSet data(y);
  const PowerEstimate p = matched_filter_init(dict, data);
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == 0.0);
  CHECK(p[2] == 0.0);
  CHECK(p[3] == doctest::Approx(1.0));
  CHECK(p[4] == doctest::Approx(data.noise_floor()));
}

TEST_CASE("matched filter scales with |c|^2 and matches direct evaluation") {
  const CMatrix B = ref::gaussian(3, 5, 3);
  const CVector y = ref::gaussian_vec(3, 4);
  const Dictionary dict(B);
  const PowerEstimate p = matched_filter_init(dict, SnapshotSet(y));
  const CMatrix A = ref::augmented(B);
  for (Index k = 0; k < 8; ++k) {
    const double nk = A.col(k).squaredNorm();
    const double expected = std::norm(A.col(k).dot(y)) / (nk * nk);
    CHECK(p[k] == doctest::Approx(std::max(expected, k >= 5 ? SnapshotSet(y).noise_floor() : 0.0)).epsilon(1e-13));
  }
  const cplx c(1.5, -2.0);
  const PowerEstimate pc = matched_filter_init(dict, SnapshotSet(CVector(c * y)));
  CHECK(ref::rel_vec(pc.values(), RVector(std::norm(c) * p.values())) < 1e-13);
}

TEST_CASE("matched filter averages over snapshots and rejects zero data") {
  const CMatrix B = ref::gaussian(4, 6, 5);
  const CMatrix Y = ref::gaussian(4, 3, 6);
  const Dictionary dict(B);
  const PowerEstimate p = matched_filter_init(dict, SnapshotSet(Y));
  for (Index k = 0; k < 6; ++k) {
    double s = 0.0;
    for (Index t = 0; t < 3; ++t) s += std::norm(B.col(k).dot(Y.col(t)));
    const double nk = B.col(k).squaredNorm();
    CHECK(p[k] == doctest::Approx(s / 3.0 / (nk * nk)).epsilon(1e-12));
  }
  try {
    matched_filter_init(dict, SnapshotSet(CMatrix::Zero(4, 1)));
    FAIL("expected ZeroData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroData);
  }
}

TEST_CASE("one version-a step matches the explicit-inverse evaluation") {
  const CMatrix B = ref::gaussian(3, 5, 7);
  const CVector y = ref::gaussian_vec(3, 8);
  const RVector p = ref::uniform_powers(8, 9);
  const Dictionary dict(B);
  const RVector w = dict.column_sq_norms();
  const PowerEstimate next = iterate_once(dict, SnapshotSet(y), PowerEstimate(p, 5), w, StepRule::VersionA);
  const CVector g = ref::g(B, p, y);
  for (Index k = 0; k < 8; ++k) CHECK(next[k] == doctest::Approx(p[k] * std::abs(g[k]) / std::sqrt(w[k])).epsilon(1e-12));
  const PowerEstimate nb = iterate_once(dict, SnapshotSet(y), PowerEstimate(p, 5), w, StepRule::VersionB);
  for (Index k = 0; k < 8; ++k) CHECK(nb[k] == doctest::Approx(p[k] * std::norm(g[k]) / w[k]).epsilon(1e-12));
}

TEST_CASE("weights equal to |g|^2 make p a fixed point of both steps") {
  const CMatrix B = ref::gaussian(4, 6, 10);
  const CVector y = ref::gaussian_vec(4, 11);
  const RVector p = ref::uniform_powers(10, 12);
  const RVector w = ref::g(B, p, y).cwiseAbs2();
  const Dictionary dict(B);
  for (StepRule s : kSteps) {
    const PowerEstimate next = iterate_once(dict, SnapshotSet(y), PowerEstimate(p, 6), w, s);
    CHECK(ref::rel_vec(next.values(), p) < 1e-12);
  }
}

TEST_CASE("zero signal powers stay zero and nonpositive weights are rejected") {
  const Instance inst = small(13);
  RVector p = ref::uniform_powers(28, 14);
  p[4] = 0.0;
  const PowerEstimate pe(p, 20);
  const auto f = factor_covariance(inst.dict, pe);
  const RVector d = capon_denominators(f, inst.dict);
  for (const auto& policy : kPolicies) {
    for (StepRule s : kSteps) {
      CHECK(iterate_once(inst.dict, inst.data, pe, policy_weights(policy, inst.dict, pe, d), s)[4] == 0.0);
    }
  }
  RVector w = inst.dict.column_sq_norms();
  w[2] = 0.0;
  try {
    iterate_once(inst.dict, inst.data, pe, w, StepRule::VersionA);
    FAIL("expected NonpositiveWeight");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonpositiveWeight);
    CHECK(e.index() == 2);
  }
}

TEST_CASE("weighted cost: scalar case, homogeneity and explicit inverse") {
  const Dictionary scalar(CMatrix::Ones(1, 1));
  CHECK(weighted_cost(scalar, SnapshotSet(CVector::Ones(1)), PowerEstimate(RVector::Ones(2), 1), RVector::Ones(2)) ==
        doctest::Approx(2.5));

  const CMatrix B = ref::gaussian(4, 7, 15);
  const CVector y = ref::gaussian_vec(4, 16);
  const RVector p = ref::uniform_powers(11, 17);
  const RVector w = ref::uniform_powers(11, 18);
  const Dictionary dict(B);
  const double c1 = weighted_cost(dict, SnapshotSet(y), PowerEstimate(p, 7), RVector::Zero(11));
  const double c2 = weighted_cost(dict, SnapshotSet(CVector(std::sqrt(2.0) * y)), PowerEstimate(p, 7).scaled(2.0),
                                  RVector::Zero(11));
  CHECK(c1 == doctest::Approx(c2).epsilon(1e-13));
  CHECK(weighted_cost(dict, SnapshotSet(y), PowerEstimate(p, 7), w) ==
        doctest::Approx(ref::fit(B, p, y) + w.dot(p)).epsilon(1e-12));
}

TEST_CASE("surrogate objectives") {
  const CMatrix B = ref::gaussian(3, 4, 19);
  const CVector y = ref::gaussian_vec(3, 20);
  const Dictionary dict(B);
  RVector p = RVector::Zero(7);
  p.tail(3).setOnes();
  CHECK(*surrogate_objective(dict, SnapshotSet(y), PowerEstimate(p, 4), LikesPolicy{}) ==
        doctest::Approx(y.squaredNorm()).epsilon(1e-13));
  CHECK(*surrogate_objective(dict, SnapshotSet(y), PowerEstimate(RVector::Ones(7), 4), SlimPolicy{}) ==
        doctest::Approx(ref::fit(B, RVector::Ones(7), y)).epsilon(1e-12));
  CHECK_FALSE(surrogate_objective(dict, SnapshotSet(y), PowerEstimate(p, 4), SpicePolicy{}).has_value());
  CHECK_FALSE(surrogate_objective(dict, SnapshotSet(y), PowerEstimate(p, 4), IaaPolicy{}).has_value());
  try {
    surrogate_objective(dict, SnapshotSet(y), PowerEstimate(p, 4), SlimPolicy{});
    FAIL("expected LogOfZero");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LogOfZero);
  }
  const RVector q = ref::uniform_powers(7, 21);
  CHECK(*surrogate_objective(dict, SnapshotSet(y), PowerEstimate(q, 4), LikesPolicy{}) ==
        doctest::Approx(ref::fit(B, q, y) + std::log(ref::covariance(B, q).determinant().real())).epsilon(1e-12));
}

TEST_CASE("tangent-plane trace identity: sum d_k p_k = N") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dictionary dict(ref::gaussian(6, 15, seed));
    const PowerEstimate p(ref::uniform_powers(21, seed + 50), 15);
    const RVector d = capon_denominators(factor_covariance(dict, p), dict);
    CHECK(p.values().dot(d) == doctest::Approx(6.0).epsilon(1e-12));
  }
}

TEST_CASE("weight ordering 1/p >= d >= p d^2 at a common point") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dictionary dict(ref::gaussian(5, 12, seed + 60));
    const PowerEstimate p(ref::uniform_powers(17, seed + 70, 1e-3, 50.0), 12);
    const RVector d = capon_denominators(factor_covariance(dict, p), dict);
    const RVector slim = policy_weights(SlimPolicy{}, dict, p, d);
    const RVector likes = policy_weights(LikesPolicy{}, dict, p, d);
    const RVector iaa = policy_weights(IaaPolicy{}, dict, p, d);
    CHECK(((slim - likes).array() >= -1e-12 * slim.array()).all());
    CHECK(((likes - iaa).array() >= -1e-12 * likes.array()).all());
    CHECK(policy_weights(SpicePolicy{}, dict, p, d) == dict.column_sq_norms());
  }
}

TEST_CASE("config validation") {
  const Instance inst = small(22);
  CHECK_THROWS_AS(estimate(inst.dict, inst.data, config(SpicePolicy{}, StepRule::VersionA, 0.0)), Error);
  CHECK_THROWS_AS(estimate(inst.dict, inst.data, config(SpicePolicy{}, StepRule::VersionA, 1e-3, 0)), Error);
  try {
    estimate(inst.dict, inst.data, config(LikesPolicy{}, StepRule::VersionA));
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
  }
}

TEST_CASE("trace bookkeeping") {
  const Instance inst = small(23);
  EstimatorConfig c = config(LikesPolicy{}, StepRule::VersionA);
  c.keep_power_history = true;
  const EstimationTrace t = run(inst, c);
  CHECK(t.cost_history.size() == static_cast<std::size_t>(t.iterations_run));
  CHECK(t.cost_after_step.size() == static_cast<std::size_t>(t.iterations_run));
  REQUIRE(t.surrogate_history.has_value());
  CHECK(t.surrogate_history->size() == static_cast<std::size_t>(t.iterations_run + 1));
  CHECK(t.power_history.size() == static_cast<std::size_t>(t.iterations_run + 1));
  CHECK(t.power_history.back().values() == t.powers.values());
  CHECK_FALSE(run(inst, config(IaaPolicy{}, StepRule::VersionA)).surrogate_history.has_value());
}

TEST_CASE("SLIM stops at its five-iteration cap") {
  const Instance inst = small(24);
  const EstimationTrace t = estimate(inst.dict, inst.data, config(SlimPolicy{}, StepRule::VersionA));
  CHECK(t.iterations_run == 5);
  CHECK(t.termination == Termination::PolicyLimit);
  EstimatorConfig c = config(SlimPolicy{3}, StepRule::VersionB);
  CHECK(estimate(inst.dict, inst.data, c).iterations_run == 3);
}

TEST_CASE("LIKES weights only change at refresh boundaries") {
  const Instance inst = small(25);
  const EstimationTrace spice = estimate(inst.dict, inst.data, config(SpicePolicy{}, StepRule::VersionA));
  EstimatorConfig c = config(LikesPolicy{5}, StepRule::VersionA, 1e-12, 23);
  c.init = FromPowers{spice.powers};
  c.keep_power_history = true;
  const EstimationTrace t = estimate(inst.dict, inst.data, c);
  REQUIRE(t.iterations_run == 23);
  for (int i = 0; i < t.iterations_run; ++i) {
    const auto& anchor = t.power_history[static_cast<std::size_t>(5 * (i / 5))];
    const RVector w = capon_denominators(factor_covariance(inst.dict, anchor), inst.dict);
    CHECK(t.cost_history[static_cast<std::size_t>(i)] ==
          doctest::Approx(weighted_cost(inst.dict, inst.data, t.power_history[static_cast<std::size_t>(i)], w))
              .epsilon(1e-12));
  }
}

TEST_CASE("pure-noise data never produce a signal power above the matched-filter peak") {
  const Instance inst = instance(8, 20, {3}, {1e-300}, -3000.0, 26);
  const double peak = matched_filter_init(inst.dict, inst.data).values().maxCoeff();
  for (const auto& policy : kPolicies) {
    const EstimationTrace t = run(inst, config(policy, StepRule::VersionA));
    CHECK(t.powers.signal().maxCoeff() <= peak);
  }
}

TEST_CASE("single strong atom: largest power on the best single-atom least-squares fit") {
  const Instance inst = instance(8, 20, {11}, {1.0}, 30.0, 27);
  const EstimationTrace t = estimate(inst.dict, inst.data, config(SpicePolicy{}, StepRule::VersionA));
  const CMatrix& B = inst.dict.regressors();
  const CVector y = inst.data.y();
  Index best = 0;
  double best_residual = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < B.cols(); ++k) {
    const cplx x = B.col(k).dot(y) / B.col(k).squaredNorm();
    const double r = (y - x * B.col(k)).squaredNorm();
    if (r < best_residual) {
      best_residual = r;
      best = k;
    }
  }
  Index argmax = 0;
  t.powers.signal().maxCoeff(&argmax);
  CHECK(argmax == best);
  CHECK(best == 11);
}

TEST_CASE("SPICE step a and step b reach the same powers at tolerance 1e-8") {
  const Instance inst = instance(8, 20, {11}, {1.0}, 30.0, 27);
  const EstimationTrace a = estimate(inst.dict, inst.data, config(SpicePolicy{}, StepRule::VersionA, 1e-8, 100000));
  const EstimationTrace b = estimate(inst.dict, inst.data, config(SpicePolicy{}, StepRule::VersionB, 1e-8, 100000));
  CHECK(ref::rel_vec(b.powers.values(), a.powers.values()) <= 1e-3);
}

TEST_CASE("a fixed point of step a is a fixed point of step b") {
  for (std::uint64_t seed = 30; seed < 34; ++seed) {
    const Instance inst = small(seed);
    for (const auto& policy : {WeightPolicy{SpicePolicy{}}, WeightPolicy{IaaPolicy{}}}) {
      const double tol = 1e-10;
      const EstimationTrace a = estimate(inst.dict, inst.data, config(policy, StepRule::VersionA, tol, 200000));
      REQUIRE(a.termination == Termination::Converged);
      const RVector d = capon_denominators(factor_covariance(inst.dict, a.powers), inst.dict);
      const PowerEstimate next =
          iterate_once(inst.dict, inst.data, a.powers, policy_weights(policy, inst.dict, a.powers, d), StepRule::VersionB);
      CHECK(ref::rel_vec(next.values(), a.powers.values()) < 10 * tol);
    }
  }
}

TEST_CASE("descent properties over random instances") {
  for (std::uint64_t seed = 40; seed < 52; ++seed) {
    const Instance inst = instance(4 + 4 * (seed % 3), 4 * (4 + 4 * (seed % 3)), {1, 5, 9}, {1, 9, 4},
                                   static_cast<double>(seed % 31), seed);
    CAPTURE(seed);
    for (StepRule s : kSteps) {
      CAPTURE(step_name(s));
      const EstimationTrace sp = estimate(inst.dict, inst.data, config(SpicePolicy{}, s));
      CHECK(worst_increase(sp.cost_history) <= 1e-10);
      const EstimationTrace sl = estimate(inst.dict, inst.data, config(SlimPolicy{}, s));
      CHECK(worst_increase(*sl.surrogate_history) <= 1e-10);
      for (const auto& policy : {WeightPolicy{LikesPolicy{}}, WeightPolicy{SlimPolicy{}}, WeightPolicy{IaaPolicy{}}}) {
        const EstimationTrace t = run(inst, config(policy, s));
        for (std::size_t i = 0; i < t.cost_history.size(); ++i) {
          CHECK(t.cost_after_step[i] <= t.cost_history[i] * (1 + 1e-10));
        }
      }
      const EstimationTrace lk = run(inst, config(LikesPolicy{}, s));
      CHECK(worst_increase(*lk.surrogate_history) <= 1e-10);
    }
  }
}

TEST_CASE("fixed-weight descent for arbitrary frozen weights") {
  for (std::uint64_t seed = 60; seed < 80; ++seed) {
    const Instance inst = small(seed);
    const PowerEstimate p(ref::uniform_powers(28, seed, 1e-3, 10.0), 20);
    const RVector w = ref::uniform_powers(28, seed + 1000, 1e-2, 100.0);
    for (StepRule s : kSteps) {
      const PowerEstimate next = iterate_once(inst.dict, inst.data, p, w, s);
      CHECK(weighted_cost(inst.dict, inst.data, next, w) <= weighted_cost(inst.dict, inst.data, p, w) * (1 + 1e-12));
    }
  }
}

TEST_CASE("Capon bound p_k d_k <= 1 along every iterate") {
  const Instance inst = small(81, 25.0);
  for (const auto& policy : kPolicies) {
    for (StepRule s : kSteps) {
      EstimatorConfig c = config(policy, s);
      c.keep_power_history = true;
      for (const auto& p : run(inst, c).power_history) {
        const RVector d = capon_denominators(factor_covariance(inst.dict, p), inst.dict);
        CHECK((p.values().array() * d.array()).maxCoeff() <= 1.0 + 1e-10);
      }
    }
  }
}

TEST_CASE("zero initial powers stay zero through a whole run") {
  const Instance inst = small(82);
  RVector p0 = matched_filter_init(inst.dict, inst.data).values();
  p0[9] = 0.0;
  for (const auto& policy : {WeightPolicy{SpicePolicy{}}, WeightPolicy{SlimPolicy{}}, WeightPolicy{IaaPolicy{}},
                             WeightPolicy{LikesPolicy{}}}) {
    for (StepRule s : kSteps) {
      EstimatorConfig c = config(policy, s);
      c.init = FromPowers{PowerEstimate(p0, 20)};
      CHECK(estimate(inst.dict, inst.data, c).powers[9] == 0.0);
    }
  }
}

TEST_CASE("scaling the data by c scales SPICE iterates by |c|") {
  const Instance inst = small(83);
  const cplx c(2.0, -1.0);
  EstimatorConfig cfg = config(SpicePolicy{}, StepRule::VersionA, 1e-300, 50);
  const EstimationTrace t1 = estimate(inst.dict, inst.data, cfg);
  const EstimationTrace t2 = estimate(inst.dict, SnapshotSet(CVector(c * inst.data.y())), cfg);
  CHECK(t1.iterations_run == t2.iterations_run);
  CHECK(ref::rel_vec(t2.powers.values(), RVector(std::abs(c) * t1.powers.values())) < 1e-6);
  Index a1 = 0, a2 = 0;
  t1.powers.signal().maxCoeff(&a1);
  t2.powers.signal().maxCoeff(&a2);
  CHECK(a1 == a2);
}

TEST_CASE("duplicated snapshots scale multisnapshot SPICE iterates by ||y||") {
  const Instance inst = small(84);
  const CVector y = inst.data.y();
  CMatrix Y(y.size(), 2);
  Y << y, y;
  EstimatorConfig cfg = config(SpicePolicy{}, StepRule::VersionA, 1e-300, 20);
  const EstimationTrace one = estimate(inst.dict, inst.data, cfg);
  const EstimationTrace two = estimate(inst.dict, SnapshotSet(Y), cfg);
  CHECK(ref::rel_vec(two.powers.values(), RVector(y.norm() * one.powers.values())) < 1e-10);
}

TEST_CASE("uniform noise keeps one shared noise power") {
  const Instance inst = small(85);
  const EstimationTrace t = estimate_uniform_noise(inst.dict, inst.data, EstimatorConfig{});
  CHECK(t.uniform_noise);
  CHECK((t.powers.noise().array() == t.powers.noise()[0]).all());
  EstimatorConfig c;
  c.uniform_noise = true;
  CHECK(estimate(inst.dict, inst.data, c).powers.values() == t.powers.values());
}

TEST_CASE("uniform noise on exactly representable data drives sigma^2 to the floor") {
  const Instance inst = instance(8, 20, {6}, {1.0}, std::numeric_limits<double>::infinity(), 86);
  const EstimationTrace t = estimate_uniform_noise(inst.dict, inst.data, config(SpicePolicy{}, StepRule::VersionA, 1e-12, 100000));
  CHECK(t.powers.noise()[0] <= 1e3 * inst.data.noise_floor());
}

TEST_CASE("uniform-noise scaling by c scales sigma^2 by |c|") {
  const Instance inst = small(87);
  EstimatorConfig cfg = config(SpicePolicy{}, StepRule::VersionA, 1e-300, 40);
  const EstimationTrace t1 = estimate_uniform_noise(inst.dict, inst.data, cfg);
  const EstimationTrace t2 = estimate_uniform_noise(inst.dict, SnapshotSet(CVector(3.0 * inst.data.y())), cfg);
  CHECK(t2.powers.noise()[0] == doctest::Approx(3.0 * t1.powers.noise()[0]).epsilon(1e-8));
}

TEST_CASE("runs are bit-reproducible") {
  const Instance inst = small(88);
  for (const auto& policy : kPolicies) {
    const EstimationTrace a = run(inst, config(policy, StepRule::VersionA));
    const EstimationTrace b = run(inst, config(policy, StepRule::VersionA));
    CHECK(a.powers.values() == b.powers.values());
    CHECK(a.cost_history == b.cost_history);
  }
}

}
