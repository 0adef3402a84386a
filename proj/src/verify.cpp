#include "wspice/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>

#include "wspice/amplitude.hpp"
#include "wspice/errors.hpp"
#include "wspice/estimators.hpp"
#include "wspice/experiments.hpp"
#include "wspice/identifiability.hpp"
#include "wspice/oracle.hpp"

namespace wspice {

namespace {

constexpr double kDescentSlack = 1e-10;

struct Tracker {
  CheckResult result;
  int cases = 0;
  int failures = 0;

  Tracker(std::string name, std::string relation, double tolerance) {
    result.name = std::move(name);
    result.relation = std::move(relation);
    result.tolerance = tolerance;
  }

  void observe(double violation) {
    ++cases;
    if (!(violation <= result.tolerance)) ++failures;
    if (std::isnan(violation) || violation > result.worst) result.worst = violation;
  }

  void error(const std::string& what) {
    ++cases;
    ++failures;
    result.worst = std::numeric_limits<double>::infinity();
    if (result.detail.empty()) result.detail = what;
  }

  CheckResult finish() {
    result.passed = failures == 0 && cases > 0;
    std::string counts = std::to_string(cases - failures) + "/" + std::to_string(cases) + " cases within tolerance";
    result.detail = result.detail.empty() ? counts : counts + "; " + result.detail;
    return result;
  }
};

double rel_increase(double before, double after) {
  return (after - before) / std::max({std::abs(before), std::abs(after), 1e-300});
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

double worst_increase(const std::vector<double>& v) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || !std::isfinite(v[i - 1])) break;
    worst = std::max(worst, rel_increase(v[i - 1], v[i]));
  }
  return std::max(worst, 0.0);
}

std::vector<AlgorithmSpec> all_algorithms() {
  std::vector<AlgorithmSpec> out;
  for (const WeightPolicy& policy : {WeightPolicy{SpicePolicy{}}, WeightPolicy{LikesPolicy{}},
                                     WeightPolicy{SlimPolicy{}}, WeightPolicy{IaaPolicy{}}}) {
    out.push_back({policy, StepRule::VersionA});
    out.push_back({policy, StepRule::VersionB});
  }
  return out;
}

EstimationTrace run(const Instance& inst, const AlgorithmSpec& algo, double tol, int max_iters, bool history) {
  EstimatorConfig config;
  config.policy = algo.policy;
  config.step = algo.step;
  config.tol = tol;
  config.max_iters = max_iters;
  config.keep_power_history = history;
  if (std::holds_alternative<LikesPolicy>(algo.policy)) return estimate_likes_from_spice(inst.dict, inst.data, config);
  return estimate(inst.dict, inst.data, config);
}

// Joint criterion in (x, p) at the minimizing powers p_k = |x_k| / sqrt(w_k) for the given x.
double joint_at_optimal_powers(const Dictionary& dict, const CVector& y, const CVector& x, const RVector& w) {
  const Index M = dict.signals();
  const CVector r = y - dict.regressors() * x;
  double total = 0.0;
  auto add = [&](double mag, double wk) {
    const double pk = mag / std::sqrt(wk);
    if (pk == 0.0) return;
    total += mag * mag / pk + wk * pk;
  };
  for (Index k = 0; k < M; ++k) add(std::abs(x[k]), w[k]);
  for (Index k = 0; k < r.size(); ++k) add(std::abs(r[k]), w[M + k]);
  return total;
}

CMatrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  CMatrix B(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) B(i, j) = cplx(n(rng), n(rng));
  return B;
}

std::vector<Instance> make_instances(const VerifyOptions& o) {
  ExperimentSpec spec;
  spec.N = o.n;
  spec.M = o.m;
  spec.support = {o.m / 5, o.m / 2, (4 * o.m) / 5};
  spec.powers = reference_powers();
  spec.algorithms = default_algorithms();
  spec.seed = o.seed;
  std::vector<Instance> out;
  for (int i = 0; i < o.instances; ++i) {
    spec.snr_db = 5.0 + 5.0 * (i % 5);
    out.push_back(gen_iid_instance(spec, i));
  }
  return out;
}

void descent_checks(const std::vector<Instance>& instances, std::vector<CheckResult>& out) {
  Tracker spice("spice cost descent", "y*R(p)^-1 y + sum ||a_k||^2 p_k is non-increasing along SPICE iterates",
                kDescentSlack);
  Tracker fixed("fixed-weight descent",
                "one step with frozen weights w never increases y*R(p)^-1 y + sum w_k p_k", kDescentSlack);
  Tracker likes("likelihood descent",
                "y*R(p)^-1 y + ln|R(p)| is non-increasing per iteration (step a) and across weight refreshes",
                kDescentSlack);
  Tracker slim("slim surrogate descent", "y*R(p)^-1 y + sum ln p_k is non-increasing while every p_k > 0",
               kDescentSlack);
  Tracker capon("capon bound", "p_k Re{a_k* R(p)^-1 a_k} <= 1 at every iterate", kDescentSlack);
  Tracker trace_id("trace identity", "sum_k p_k Re{a_k* R(p)^-1 a_k} = N", 1e-10);
  Tracker sparsity("sparsity ordering", "|p_k a_k* R^-1 y| <= |a_k* R^-1 y| / Re{a_k* R^-1 a_k}", 1e-12);

  for (const auto& inst : instances) {
    for (const auto& algo : all_algorithms()) {
      try {
        const EstimationTrace t = run(inst, algo, 1e-3, 1000, true);
        if (std::holds_alternative<SpicePolicy>(algo.policy)) {
          spice.observe(worst_increase(t.cost_history));
        } else {
          double w = 0.0;
          for (std::size_t i = 0; i < t.cost_after_step.size() && i < t.cost_history.size(); ++i) {
            w = std::max(w, rel_increase(t.cost_history[i], t.cost_after_step[i]));
          }
          fixed.observe(w);
        }
        if (const auto* lp = std::get_if<LikesPolicy>(&algo.policy)) {
          const auto& s = *t.surrogate_history;
          std::vector<double> starts;
          for (std::size_t i = 0; i < s.size(); i += static_cast<std::size_t>(lp->refresh_period)) starts.push_back(s[i]);
          likes.observe(worst_increase(starts));
          if (algo.step == StepRule::VersionA) likes.observe(worst_increase(s));
        }
        if (std::holds_alternative<SlimPolicy>(algo.policy)) slim.observe(worst_increase(*t.surrogate_history));

        double worst_bound = 0.0;
        for (const auto& p : t.power_history) {
          const CovarianceFactor f = factor_covariance(inst.dict, p);
          const RVector d = capon_denominators(f, inst.dict);
          worst_bound = std::max(worst_bound, (p.values().array() * d.array()).maxCoeff() - 1.0);
        }
        capon.observe(worst_bound);

        const CovarianceFactor f = factor_covariance(inst.dict, t.powers);
        const RVector d = capon_denominators(f, inst.dict);
        const double n = static_cast<double>(inst.dict.rows());
        trace_id.observe(std::abs(t.powers.values().dot(d) - n) / n);

        const CVector xl = lmmse_amplitudes(inst.dict, inst.data, t.powers).first();
        const CVector xc = capon_amplitudes(inst.dict, inst.data, t.powers).first();
        double worst_ratio = 0.0;
        for (Index k = 0; k < xl.size(); ++k) {
          if (xc[k] != cplx(0.0)) worst_ratio = std::max(worst_ratio, std::abs(xl[k]) / std::abs(xc[k]) - 1.0);
        }
        sparsity.observe(worst_ratio);
      } catch (const Error& e) {
        spice.error(algo.label() + ": " + e.what());
      }
    }
  }
  for (Tracker* t : {&spice, &fixed, &likes, &slim, &capon, &trace_id, &sparsity}) out.push_back(t->finish());
}

void identity_checks(const std::vector<Instance>& instances, const VerifyOptions& o, std::vector<CheckResult>& out) {
  Tracker inner("inner least squares",
                "min_x (y-Bx)* S^-1 (y-Bx) + sum |x_k|^2/p_k = y* R^-1 y", 1e-10);
  Tracker lmmse("lmmse identity", "argmin of the inner least-squares problem = Pi B* R^-1 y", 1e-8);
  Tracker weights("weight ordering", "1/p_k >= Re{a_k* R^-1 a_k} >= p_k Re{a_k* R^-1 a_k}^2", 1e-12);
  Tracker zeros("zero absorption", "p_k = 0 implies p_k = 0 after one step, every policy and step", 0.0);

  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    auto rng = trial_rng(o.seed, i, 7);
    RVector v(inst.dict.atoms());
    for (Index k = 0; k < v.size(); ++k) v[k] = u(rng);
    const PowerEstimate p(v, inst.dict.signals());
    try {
      const auto sol = oracle::solve_inner_ls(inst.dict, inst.data.y(), p);
      const CovarianceFactor f = factor_covariance(inst.dict, p);
      inner.observe(rel_gap(sol.objective, data_fit(f, inst.data)));
      const CVector xl = lmmse_amplitudes(inst.dict, inst.data, p).first();
      lmmse.observe((sol.x - xl).norm() / xl.norm());

      const RVector d = capon_denominators(f, inst.dict);
      double w = 0.0;
      for (Index k = 0; k < v.size(); ++k) {
        w = std::max(w, (d[k] - 1.0 / v[k]) * v[k]);
        w = std::max(w, (v[k] * d[k] * d[k] - d[k]) / d[k]);
      }
      weights.observe(w);

      RVector z = v;
      z[inst.dict.signals() / 3] = 0.0;
      const PowerEstimate pz(z, inst.dict.signals());
      const CovarianceFactor fz = factor_covariance(inst.dict, pz);
      const RVector dz = capon_denominators(fz, inst.dict);
      for (const auto& algo : all_algorithms()) {
        const RVector wz = policy_weights(algo.policy, inst.dict, pz, dz);
        const PowerEstimate next = iterate_once(inst.dict, inst.data, pz, wz, algo.step);
        zeros.observe(std::abs(next[inst.dict.signals() / 3]));
      }
    } catch (const Error& e) {
      inner.error(e.what());
    }
  }
  for (Tracker* t : {&inner, &lmmse, &weights, &zeros}) out.push_back(t->finish());
}

void oracle_checks(const std::vector<Instance>& instances, std::vector<CheckResult>& out) {
  Tracker direct("direct minimization",
                 "SPICE fixed point attains min_{p>=0} y*R(p)^-1 y + sum ||a_k||^2 p_k", 1e-4);
  Tracker scaling("power scaling",
                  "argmin{y*R^-1 y + c^2 sum w_k p_k} = argmin{y*R^-1 y + sum w_k p_k} / c, c in {0.5, 2, 10}",
                  1e-4);
  Tracker lad("l1-penalized LAD equivalence",
              "joint (x,p) criterion at SPICE's (x, |x_k|/sqrt(w_k)) = 2 min_x ||W1^1/2 (y-Bx)||_1 + ||W2^1/2 x||_1",
              1e-3);
  Tracker sqrt_lasso("square-root LASSO equivalence",
                     "uniform-noise SPICE minimum = 2 min_x sqrt(sum_noise w) ||y-Bx||_2 + sum sqrt(w_k) |x_k|", 1e-3);
  Tracker stationary("stationary points", "a fixed point of p|g|/sqrt(w) is a fixed point of p|g|^2/w", 1e-9);

  for (const auto& inst : instances) {
    const Dictionary& dict = inst.dict;
    const CVector y = inst.data.y();
    const RVector& w = dict.column_sq_norms();
    const Index M = dict.signals();
    const Index N = dict.rows();
    try {
      const EstimationTrace t = run(inst, {SpicePolicy{}, StepRule::VersionA}, 1e-10, 200000, false);
      const double engine = weighted_cost(dict, inst.data, t.powers, w);

      const auto dm = oracle::minimize_spice_direct(dict, y, w);
      direct.observe(rel_gap(engine, dm.objective));

      for (double c : {0.5, 2.0, 10.0}) {
        const auto sc = oracle::minimize_spice_direct(dict, y, (c * c) * w);
        scaling.observe((sc.powers.values() * c - dm.powers.values()).norm() / dm.powers.values().norm());
      }

      const CVector x = lmmse_amplitudes(dict, inst.data, t.powers).first();
      const auto l1 = oracle::solve_l1_lad(dict, y, w.tail(N), w.head(M));
      lad.observe(rel_gap(joint_at_optimal_powers(dict, y, x, w), 2.0 * l1.objective));

      const PowerEstimate next = iterate_once(dict, inst.data, t.powers, w, StepRule::VersionB);
      stationary.observe((next.values() - t.powers.values()).norm() / t.powers.values().norm());

      const EstimationTrace u = estimate_uniform_noise(dict, inst.data, [] {
        EstimatorConfig c;
        c.tol = 1e-10;
        c.max_iters = 200000;
        return c;
      }());
      const auto sl = oracle::solve_sqrt_lasso(dict, y, std::sqrt(w.tail(N).sum()), w.head(M));
      sqrt_lasso.observe(rel_gap(weighted_cost(dict, inst.data, u.powers, w), 2.0 * sl.objective));
    } catch (const Error& e) {
      direct.error(e.what());
    }
  }
  for (Tracker* t : {&direct, &scaling, &lad, &sqrt_lasso, &stationary}) out.push_back(t->finish());
}

void identifiability_checks(const VerifyOptions& o, std::vector<CheckResult>& out) {
  Tracker verdicts("identifiability verdicts",
                   "M < N: unique; M+N < N^2 with full Khatri-Rao rank: generically unique; "
                   "otherwise A diag(q) A* = 0 for a witness q with p + eps q >= 0",
                   1e-8);
  auto rng = trial_rng(o.seed, 0, 11);
  struct Example {
    Index n, m;
    bool with_powers;
    Verdict expected;
  };
  for (const Example& ex : {Example{3, 5, false, Verdict::GenericallyUnique}, Example{2, 10, true, Verdict::NotUnique},
                            Example{3, 2, false, Verdict::Unique}}) {
    const Dictionary dict(gaussian_matrix(ex.n, ex.m, rng));
    std::optional<PowerEstimate> p;
    if (ex.with_powers) p = PowerEstimate(RVector::Ones(dict.atoms()), dict.signals());
    const UniquenessReport r = classify_uniqueness(dict, p, o.seed);
    if (r.verdict != ex.expected) {
      verdicts.error("N=" + std::to_string(ex.n) + " M=" + std::to_string(ex.m) + " gave " + verdict_name(r.verdict));
      continue;
    }
    double residual = 0.0;
    if (r.witness) {
      const CMatrix& A = dict.augmented();
      const CMatrix Q = A * r.witness->asDiagonal() * A.adjoint();
      residual = Q.norm() / (r.witness->cwiseAbs().maxCoeff() * A.squaredNorm());
    }
    verdicts.observe(residual);
  }
  out.push_back(verdicts.finish());
}

}  // namespace

std::vector<CheckResult> run_verify(const VerifyOptions& options) {
  if (options.n < 2 || options.m < 4 || options.instances < 1) {
    throw Error(ErrorKind::ConfigError, "verify needs n >= 2, m >= 4 and at least one instance");
  }
  const auto instances = make_instances(options);
  std::vector<CheckResult> out;
  descent_checks(instances, out);
  identity_checks(instances, options, out);
  oracle_checks(instances, out);
  identifiability_checks(options, out);
  return out;
}

void print_checks(std::ostream& out, const std::vector<CheckResult>& checks) {
  for (const auto& c : checks) {
    char nums[96];
    std::snprintf(nums, sizeof nums, "worst %.3e  tol %.1e", c.worst, c.tolerance);
    out << (c.passed ? "PASS  " : "FAIL  ") << c.name << "  " << nums << "  (" << c.detail << ")\n";
    if (!c.passed) out << "      violated: " << c.relation << '\n';
  }
}

}  // namespace wspice
