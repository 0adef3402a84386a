#include "wspice/estimators.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "wspice/errors.hpp"

namespace wspice {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool needs_capon(const WeightPolicy& policy, int iteration) {
  return std::visit(overloaded{
                        [](const SpicePolicy&) { return false; },
                        [&](const LikesPolicy& l) { return iteration % l.refresh_period == 0; },
                        [](const SlimPolicy&) { return false; },
                        [](const IaaPolicy&) { return true; },
                    },
                    policy);
}

double penalty(const PowerEstimate& p, const RVector& w) {
  double s = 0.0;
  for (Index k = 0; k < p.size(); ++k) {
    if (p[k] != 0.0) s += w[k] * p[k];
  }
  return s;
}

void check_weights(const RVector& w, Index expected) {
  if (w.size() != expected) throw Error(ErrorKind::DimensionMismatch, "weight vector length mismatch");
  for (Index k = 0; k < w.size(); ++k) {
    if (!(w[k] > 0.0)) throw Error(ErrorKind::NonpositiveWeight, "weight " + std::to_string(k) + " is not positive", k);
  }
}

double step_factor(double g, double w, StepRule step) {
  return step == StepRule::VersionA ? g / std::sqrt(w) : g * g / w;
}

// Multiplicative update on precomputed gradient magnitudes. With `pooled_noise`
// the noise slice shares one power updated from the pooled gradient and weight.
RVector update(const PowerEstimate& p, const RVector& g_mag, const RVector& w, StepRule step, bool pooled_noise) {
  const Index M = p.signal_count();
  RVector next(p.size());
  for (Index k = 0; k < M; ++k) {
    next[k] = p[k] == 0.0 ? 0.0 : p[k] * step_factor(g_mag[k], w[k], step);
  }
  if (!pooled_noise) {
    for (Index k = M; k < p.size(); ++k) {
      next[k] = p[k] == 0.0 ? 0.0 : p[k] * step_factor(g_mag[k], w[k], step);
    }
  } else {
    const double sigma2 = p[M];
    const double g_pool = g_mag.tail(p.noise_count()).norm();
    const double w_pool = w.tail(p.noise_count()).sum();
    next.tail(p.noise_count()).setConstant(sigma2 == 0.0 ? 0.0 : sigma2 * step_factor(g_pool, w_pool, step));
  }
  return next;
}

std::optional<double> surrogate_at(const WeightPolicy& policy, const CovarianceFactor& factor, double fit,
                                   const PowerEstimate& p) {
  if (std::holds_alternative<LikesPolicy>(policy)) return fit + factor.log_det();
  if (std::holds_alternative<SlimPolicy>(policy)) {
    double s = fit;
    for (Index k = 0; k < p.size(); ++k) {
      if (p[k] == 0.0) return -std::numeric_limits<double>::infinity();
      s += std::log(p[k]);
    }
    return s;
  }
  return std::nullopt;
}

PowerEstimate pool_noise(const PowerEstimate& p) {
  RVector v = p.values();
  v.tail(p.noise_count()).setConstant(p.noise().mean());
  return PowerEstimate(std::move(v), p.signal_count());
}

EstimationTrace run_engine(const Dictionary& dict, const SnapshotSet& data, const EstimatorConfig& config,
                           bool pooled_noise) {
  config.validate();
  if (data.rows() != dict.rows()) throw Error(ErrorKind::DimensionMismatch, "data rows differ from dictionary");
  if (std::holds_alternative<LikesPolicy>(config.policy) && !std::holds_alternative<FromPowers>(config.init)) {
    throw Error(ErrorKind::ConfigError, "LIKES must be initialized from SPICE powers (FromPowers)");
  }

  const auto start = std::chrono::steady_clock::now();
  const double floor = data.noise_floor();

  PowerEstimate p = std::visit(overloaded{
                                   [&](const MatchedFilterInit&) { return matched_filter_init(dict, data); },
                                   [&](const FromPowers& f) { return f.powers; },
                               },
                               config.init);
  if (p.size() != dict.atoms() || p.signal_count() != dict.signals()) {
    throw Error(ErrorKind::DimensionMismatch, "initial powers do not match dictionary");
  }
  if (pooled_noise) p = pool_noise(p);
  p = p.floored(floor);

  EstimationTrace trace;
  trace.policy = config.policy;
  trace.step = config.step;
  trace.uniform_noise = pooled_noise;
  const bool tracks_surrogate =
      std::holds_alternative<LikesPolicy>(config.policy) || std::holds_alternative<SlimPolicy>(config.policy);
  if (tracks_surrogate) trace.surrogate_history.emplace();
  if (config.keep_power_history) trace.power_history.push_back(p);

  const int policy_cap =
      std::holds_alternative<SlimPolicy>(config.policy) ? std::get<SlimPolicy>(config.policy).max_iters : 0;

  RVector weights;
  RVector previous_weights;
  RVector d;
  for (int i = 0;; ++i) {
    const CovarianceFactor factor = factor_covariance(dict, p);
    const double fit = data_fit(factor, data);
    if (i > 0) trace.cost_after_step.push_back(fit + penalty(p, previous_weights));
    if (tracks_surrogate) trace.surrogate_history->push_back(*surrogate_at(config.policy, factor, fit, p));

    const bool refresh = needs_capon(config.policy, i);
    if (refresh) d = capon_denominators(factor, dict);
    if (i == 0 || !std::holds_alternative<SpicePolicy>(config.policy)) {
      if (std::holds_alternative<LikesPolicy>(config.policy)) {
        if (refresh) weights = policy_weights(config.policy, dict, p, d);
      } else {
        weights = policy_weights(config.policy, dict, p, d);
      }
    }
    trace.cost_history.push_back(fit + penalty(p, weights));

    const RVector g_mag = gradient_magnitudes(factor, dict, data);
    PowerEstimate next(update(p, g_mag, weights, config.step, pooled_noise), p.signal_count());
    next = next.floored(floor);
    ++trace.iterations_run;

    const double base = p.values().norm();
    const double change = (next.values() - p.values()).norm() / base;
    p = std::move(next);
    previous_weights = weights;
    if (config.keep_power_history) trace.power_history.push_back(p);

    if (change < config.tol) {
      trace.termination = Termination::Converged;
      break;
    }
    if (policy_cap > 0 && trace.iterations_run >= policy_cap) {
      trace.termination = Termination::PolicyLimit;
      break;
    }
    if (trace.iterations_run >= config.max_iters) {
      trace.termination = Termination::MaxIters;
      break;
    }
  }

  const CovarianceFactor factor = factor_covariance(dict, p);
  const double fit = data_fit(factor, data);
  trace.cost_after_step.push_back(fit + penalty(p, previous_weights));
  if (tracks_surrogate) trace.surrogate_history->push_back(*surrogate_at(config.policy, factor, fit, p));

  trace.powers = std::move(p);
  trace.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

}  // namespace

std::string policy_name(const WeightPolicy& policy) {
  return std::visit(overloaded{
                        [](const SpicePolicy&) { return std::string("spice"); },
                        [](const LikesPolicy&) { return std::string("likes"); },
                        [](const SlimPolicy&) { return std::string("slim"); },
                        [](const IaaPolicy&) { return std::string("iaa"); },
                    },
                    policy);
}

WeightPolicy policy_from_name(const std::string& name) {
  if (name == "spice") return SpicePolicy{};
  if (name == "likes") return LikesPolicy{};
  if (name == "slim") return SlimPolicy{};
  if (name == "iaa") return IaaPolicy{};
  throw Error(ErrorKind::ConfigError, "unknown algorithm '" + name + "'");
}

std::string step_name(StepRule step) { return step == StepRule::VersionA ? "a" : "b"; }

StepRule step_from_name(const std::string& name) {
  if (name == "a" || name == "A") return StepRule::VersionA;
  if (name == "b" || name == "B") return StepRule::VersionB;
  throw Error(ErrorKind::ConfigError, "unknown step rule '" + name + "'");
}

std::string termination_name(Termination t) {
  switch (t) {
    case Termination::Converged: return "Converged";
    case Termination::MaxIters: return "MaxIters";
    case Termination::PolicyLimit: return "PolicyLimit";
  }
  return "Unknown";
}

void EstimatorConfig::validate() const {
  if (!(tol > 0.0)) throw Error(ErrorKind::ConfigError, "tol must be positive");
  if (max_iters < 1) throw Error(ErrorKind::ConfigError, "max_iters must be at least 1");
  if (const auto* l = std::get_if<LikesPolicy>(&policy); l && l->refresh_period < 1) {
    throw Error(ErrorKind::ConfigError, "LIKES refresh period must be at least 1");
  }
  if (const auto* s = std::get_if<SlimPolicy>(&policy); s && s->max_iters < 1) {
    throw Error(ErrorKind::ConfigError, "SLIM iteration cap must be at least 1");
  }
}

PowerEstimate matched_filter_init(const Dictionary& dict, const SnapshotSet& data) {
  if (data.rows() != dict.rows()) throw Error(ErrorKind::DimensionMismatch, "data rows differ from dictionary");
  if (!(data.energy() > 0.0)) throw Error(ErrorKind::ZeroData, "data matrix is zero");
  const Index M = dict.signals();
  const RVector& sq = dict.column_sq_norms();
  RVector p(dict.atoms());
  if (data.single()) {
    const auto y = data.y();
    p.head(M) = (dict.regressors().adjoint() * y).cwiseAbs2();
    p.tail(dict.rows()) = y.cwiseAbs2();
  } else {
    const CMatrix& S = data.sample_cov();
    const CMatrix SB = S * dict.regressors();
    for (Index k = 0; k < M; ++k) p[k] = dict.regressors().col(k).dot(SB.col(k)).real();
    p.tail(dict.rows()) = S.diagonal().real();
  }
  p = p.cwiseMax(0.0).cwiseQuotient(sq.cwiseAbs2());
  return PowerEstimate(std::move(p), M).floored(data.noise_floor());
}

RVector policy_weights(const WeightPolicy& policy, const Dictionary& dict, const PowerEstimate& p, const RVector& d) {
  return std::visit(overloaded{
                        [&](const SpicePolicy&) -> RVector { return dict.column_sq_norms(); },
                        [&](const LikesPolicy&) -> RVector { return d; },
                        [&](const SlimPolicy&) -> RVector {
                          RVector w(p.size());
                          for (Index k = 0; k < p.size(); ++k) {
                            w[k] = p[k] > 0.0 ? 1.0 / p[k] : std::numeric_limits<double>::infinity();
                          }
                          return w;
                        },
                        [&](const IaaPolicy&) -> RVector { return p.values().cwiseProduct(d.cwiseAbs2()); },
                    },
                    policy);
}

PowerEstimate iterate_once(const Dictionary& dict, const SnapshotSet& data, const PowerEstimate& p,
                           const RVector& weights, StepRule step) {
  RVector w = weights;
  // Entries with p_k = 0 are fixed at zero whatever their weight.
  for (Index k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0 && k < w.size() && !(w[k] > 0.0)) w[k] = 1.0;
  }
  check_weights(w, dict.atoms());
  const CovarianceFactor factor = factor_covariance(dict, p);
  const RVector g_mag = gradient_magnitudes(factor, dict, data);
  PowerEstimate next(update(p, g_mag, w, step, false), p.signal_count());
  return next.floored(data.noise_floor());
}

double weighted_cost(const Dictionary& dict, const SnapshotSet& data, const PowerEstimate& p, const RVector& weights) {
  if (weights.size() != dict.atoms()) throw Error(ErrorKind::DimensionMismatch, "weight vector length mismatch");
  const CovarianceFactor factor = factor_covariance(dict, p);
  return data_fit(factor, data) + penalty(p, weights);
}

std::optional<double> surrogate_objective(const Dictionary& dict, const SnapshotSet& data, const PowerEstimate& p,
                                          const WeightPolicy& policy) {
  if (std::holds_alternative<SpicePolicy>(policy) || std::holds_alternative<IaaPolicy>(policy)) return std::nullopt;
  if (std::holds_alternative<SlimPolicy>(policy)) {
    for (Index k = 0; k < p.size(); ++k) {
      if (p[k] == 0.0) throw Error(ErrorKind::LogOfZero, "SLIM objective undefined at zero power", k);
    }
  }
  const CovarianceFactor factor = factor_covariance(dict, p);
  return surrogate_at(policy, factor, data_fit(factor, data), p);
}

EstimationTrace estimate(const Dictionary& dict, const SnapshotSet& data, const EstimatorConfig& config) {
  if (config.uniform_noise) return estimate_uniform_noise(dict, data, config);
  return run_engine(dict, data, config, false);
}

EstimationTrace estimate_uniform_noise(const Dictionary& dict, const SnapshotSet& data, EstimatorConfig config) {
  config.uniform_noise = true;
  return run_engine(dict, data, config, true);
}

EstimationTrace estimate_likes_from_spice(const Dictionary& dict, const SnapshotSet& data,
                                          const EstimatorConfig& likes_config) {
  EstimatorConfig spice = likes_config;
  spice.policy = SpicePolicy{};
  spice.init = MatchedFilterInit{};
  spice.keep_power_history = false;
  const EstimationTrace first = estimate(dict, data, spice);

  EstimatorConfig likes = likes_config;
  if (!std::holds_alternative<LikesPolicy>(likes.policy)) likes.policy = LikesPolicy{};
  likes.init = FromPowers{first.powers};
  EstimationTrace trace = estimate(dict, data, likes);
  trace.wall_time_s += first.wall_time_s;
  return trace;
}

}  // namespace wspice
