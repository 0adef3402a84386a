#pragma once

// Weighted-SPICE iteration engine. One multiplicative update
//
//   version a:  p_k <- p_k |g_k| / sqrt(w_k)
//   version b:  p_k <- p_k |g_k|^2 / w_k
//
// with g_k = a_k* R^{-1} y, parameterized by the weight rule:
//
//   SPICE  w_k = ‖a_k‖²               (constant)
//   LIKES  w_k = Re{a_k* R_l^{-1} a_k} (refreshed every m iterations)
//   SLIM   w_k = 1 / p_k               (every iteration)
//   IAA    w_k = p_k (Re{a_k* R^{-1} a_k})² (every iteration)

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "wspice/linmodel.hpp"

namespace wspice {

struct SpicePolicy {};
struct LikesPolicy {
  int refresh_period = 30;
};
struct SlimPolicy {
  int max_iters = 5;
};
struct IaaPolicy {};

using WeightPolicy = std::variant<SpicePolicy, LikesPolicy, SlimPolicy, IaaPolicy>;

/// "spice", "likes", "slim" or "iaa".
std::string policy_name(const WeightPolicy& policy);
/// Default-parameter policy from its name; throws ConfigError for unknown names.
WeightPolicy policy_from_name(const std::string& name);

enum class StepRule { VersionA, VersionB };

std::string step_name(StepRule step);
StepRule step_from_name(const std::string& name);

struct MatchedFilterInit {};
struct FromPowers {
  PowerEstimate powers;
};
using InitRule = std::variant<MatchedFilterInit, FromPowers>;

struct EstimatorConfig {
  WeightPolicy policy = SpicePolicy{};
  StepRule step = StepRule::VersionA;
  double tol = 1e-3;
  int max_iters = 1000;
  bool uniform_noise = false;
  InitRule init = MatchedFilterInit{};
  /// Keep p^0 .. p^final in the trace; off by default since it costs (M+N) doubles per iteration.
  bool keep_power_history = false;

  /// Throws ConfigError.
  void validate() const;
};

enum class Termination { Converged, MaxIters, PolicyLimit };

std::string termination_name(Termination t);

struct EstimationTrace {
  WeightPolicy policy;
  StepRule step = StepRule::VersionA;
  bool uniform_noise = false;
  PowerEstimate powers;
  int iterations_run = 0;
  Termination termination = Termination::MaxIters;
  /// Weighted cost of p^i under the weights in force at iteration i.
  std::vector<double> cost_history;
  /// Weighted cost of p^{i+1} under the same weights as cost_history[i].
  std::vector<double> cost_after_step;
  /// Global objective at p^0 .. p^final (LIKES: data fit + ln|R|, SLIM: data fit + Σ ln p_k).
  /// Absent for SPICE and IAA. Entries are -inf once a SLIM power hits zero.
  std::optional<std::vector<double>> surrogate_history;
  std::vector<PowerEstimate> power_history;
  double wall_time_s = 0.0;
};

/// p_k = a_k* Rbar a_k / ‖a_k‖⁴ (|a_k* y|² / ‖a_k‖⁴ for one snapshot), noise slice floored.
PowerEstimate matched_filter_init(const Dictionary& dict, const SnapshotSet& data);

/// Weights of `policy` at the powers p, given d_k = Re{a_k* R(p)^{-1} a_k}.
/// For LIKES this is the value at a refresh point. Entries where SLIM has p_k = 0 are +inf.
RVector policy_weights(const WeightPolicy& policy, const Dictionary& dict, const PowerEstimate& p, const RVector& d);

/// One multiplicative step with frozen weights. Zero powers stay zero. Throws NonpositiveWeight.
PowerEstimate iterate_once(const Dictionary& dict, const SnapshotSet& data, const PowerEstimate& p,
                           const RVector& weights, StepRule step);

/// Data fit plus Σ w_k p_k; terms with p_k = 0 contribute nothing.
double weighted_cost(const Dictionary& dict, const SnapshotSet& data, const PowerEstimate& p, const RVector& weights);

/// LIKES: data fit + ln|R|; SLIM: data fit + Σ ln p_k (throws LogOfZero on a zero power).
/// SPICE and IAA have no such objective and return nullopt.
std::optional<double> surrogate_objective(const Dictionary& dict, const SnapshotSet& data, const PowerEstimate& p,
                                          const WeightPolicy& policy);

EstimationTrace estimate(const Dictionary& dict, const SnapshotSet& data, const EstimatorConfig& config);

/// Same loop under R = B Π B* + σ² I: every noise entry carries the shared σ².
EstimationTrace estimate_uniform_noise(const Dictionary& dict, const SnapshotSet& data, EstimatorConfig config);

/// SPICE with the same step rule and tolerances, then LIKES initialized from its powers.
EstimationTrace estimate_likes_from_spice(const Dictionary& dict, const SnapshotSet& data,
                                          const EstimatorConfig& likes_config);

}  // namespace wspice
