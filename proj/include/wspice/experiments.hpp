#pragma once

// Monte Carlo harness for the IID-regression and uniform-linear-array DOA
// scenarios. Every trial draws from its own RNG stream, so results do not
// depend on how trials are scheduled across workers.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wspice/amplitude.hpp"
#include "wspice/estimators.hpp"
#include "wspice/linmodel.hpp"

namespace wspice {

enum class Scenario { IidRegression, UlaDoa };

std::string scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

struct AlgorithmSpec {
  WeightPolicy policy = SpicePolicy{};
  StepRule step = StepRule::VersionA;

  /// e.g. "spice_a".
  std::string label() const;
};

struct ExperimentSpec {
  Scenario scenario = Scenario::IidRegression;
  Index N = 35;
  Index M = 200;
  /// 0-based indices into the grid / regressor columns.
  std::vector<Index> support;
  /// |x_k|² for each support entry.
  std::vector<double> powers;
  double snr_db = 20.0;
  int trials = 100;
  std::uint64_t seed = 1;
  Index snapshots = 1;
  std::vector<AlgorithmSpec> algorithms;
  double tol = 1e-3;
  int max_iters = 1000;
  /// Array phase constant and grid span, UlaDoa only.
  double kappa = 3.14159265358979323846;
  double angle_min_deg = -90.0;
  double angle_max_deg = 90.0;
  /// Detection window for the DOA success rate.
  double delta_deg = 1.8;

  Index K() const { return static_cast<Index>(support.size()); }
  /// Sum of powers over 10^(snr/10).
  double noise_variance() const;
  /// Throws ConfigError.
  void validate() const;
};

/// The four policies with version-a steps.
std::vector<AlgorithmSpec> default_algorithms();

/// Support {400, 420, 600} of a 1000-column problem with powers {1, 9, 4}, mapped
/// to M columns: scaled by M/1000 for IID regression, snapped to the nearest
/// point of the M-point angle grid for DOA.
std::vector<Index> reference_support(Scenario scenario, Index M, double angle_min_deg = -90.0,
                                 double angle_max_deg = 90.0);
std::vector<double> reference_powers();

/// Reference spec with N = 35, SNR 20 dB and the default algorithms.
ExperimentSpec reference_spec(Scenario scenario, Index M = 200, int trials = 100);

/// Uniform M-point grid over [lo, hi] in degrees.
RVector angle_grid(Index M, double lo_deg, double hi_deg);
/// (1, e^{-jκ sinθ}, ..., e^{-j(N-1)κ sinθ}).
CVector steering_vector(Index N, double theta_deg, double kappa);

/// mt19937_64 seeded from (seed, trial, stream) by splitmix64 mixing.
std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream);

struct Instance {
  Dictionary dict;
  SnapshotSet data;
  /// M x T true amplitudes.
  CMatrix x;
  /// True DOAs in degrees, ascending; empty for IID regression.
  RVector doas_deg;
};

Instance gen_iid_instance(const ExperimentSpec& spec, int trial_index);
Instance gen_ula_instance(const ExperimentSpec& spec, int trial_index);
Instance gen_instance(const ExperimentSpec& spec, int trial_index);

/// Matched-filter spectrum |a_k* y|² / ‖a_k‖⁴.
PowerEstimate beamformer_baseline(const Dictionary& dict, const SnapshotSet& data);

struct TrialRecord {
  int trial = 0;
  std::string algo;
  double sq_err = 0.0;
  double signal_energy = 0.0;
  /// Exact support recovery (IID) or every DOA within the window (DOA).
  bool detected = false;
  bool support_exact = false;
  /// Σ (θ_i - θ̂_i)² over sorted DOAs; 0 for IID.
  double doa_sq_err = 0.0;
  int iterations = 0;
  double wall_time_s = 0.0;
  bool failed = false;
  std::string error;

  double nmse() const { return signal_energy > 0.0 ? sq_err / signal_energy : 0.0; }
};

struct AlgorithmSummary {
  std::string algo;
  double normalized_mse = 0.0;
  double pd_support = 0.0;
  double doa_rmse_deg = 0.0;
  double pd_within_delta = 0.0;
  double mean_wall_time_s = 0.0;
  double mean_iterations = 0.0;
  int completed = 0;
  int failures = 0;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<AlgorithmSummary> summaries;
  /// Ordered by trial, then by algorithm in spec order followed by the baselines.
  std::vector<TrialRecord> trials;
  int failures = 0;

  const AlgorithmSummary& summary(const std::string& algo) const;
};

inline constexpr const char* kOracleLsLabel = "oracle_ls";
inline constexpr const char* kBeamformerLabel = "beamformer";

/// Runs all trials on `workers` threads (0 picks the hardware concurrency).
ExperimentReport run_experiment(const ExperimentSpec& spec, unsigned workers = 1);

}  // namespace wspice
