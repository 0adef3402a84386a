#include "wspice/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <thread>

#include "wspice/errors.hpp"

namespace wspice {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr Index kReferenceGrid = 1000;
constexpr Index kReferenceSupport[] = {400, 420, 600};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct ComplexNormal {
  std::normal_distribution<double> n{0.0, std::sqrt(0.5)};
  cplx operator()(std::mt19937_64& rng) { return {n(rng), n(rng)}; }
};

CMatrix draw_amplitudes(const ExperimentSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  CMatrix x = CMatrix::Zero(spec.M, spec.snapshots);
  for (Index t = 0; t < spec.snapshots; ++t) {
    for (std::size_t i = 0; i < spec.support.size(); ++i) {
      x(spec.support[i], t) = std::polar(std::sqrt(spec.powers[i]), phase(rng));
    }
  }
  return x;
}

CMatrix add_noise(const CMatrix& clean, double sigma2, std::mt19937_64& rng) {
  ComplexNormal cn;
  const double s = std::sqrt(sigma2);
  CMatrix Y = clean;
  for (Index t = 0; t < Y.cols(); ++t) {
    for (Index i = 0; i < Y.rows(); ++i) Y(i, t) += s * cn(rng);
  }
  return Y;
}

struct Outcome {
  CMatrix x_hat;
  SupportSet support;
  int iterations = 0;
  double wall_time_s = 0.0;
};

void score(const ExperimentSpec& spec, const Instance& inst, const RVector& grid, const Outcome& out,
           TrialRecord& rec) {
  rec.sq_err = (inst.x - out.x_hat).squaredNorm();
  rec.signal_energy = inst.x.squaredNorm();
  rec.iterations = out.iterations;
  rec.wall_time_s = out.wall_time_s;
  rec.support_exact = out.support == SupportSet(spec.support, spec.M);
  if (spec.scenario == Scenario::IidRegression) {
    rec.detected = rec.support_exact;
    return;
  }
  RVector est(out.support.size());
  for (Index i = 0; i < est.size(); ++i) est[i] = grid[out.support.indices()[static_cast<std::size_t>(i)]];
  std::sort(est.begin(), est.end());
  const RVector diff = est - inst.doas_deg;
  rec.doa_sq_err = diff.squaredNorm();
  rec.detected = (diff.cwiseAbs().array() < spec.delta_deg).all();
}

Outcome run_algorithm(const ExperimentSpec& spec, const Instance& inst, const AlgorithmSpec& algo) {
  EstimatorConfig config;
  config.policy = algo.policy;
  config.step = algo.step;
  config.tol = spec.tol;
  config.max_iters = spec.max_iters;

  const auto start = std::chrono::steady_clock::now();
  const EstimationTrace trace = std::holds_alternative<LikesPolicy>(algo.policy)
                                    ? estimate_likes_from_spice(inst.dict, inst.data, config)
                                    : estimate(inst.dict, inst.data, config);
  Outcome out;
  out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.iterations = trace.iterations_run;
  if (spec.scenario == Scenario::IidRegression) {
    out.x_hat = lmmse_amplitudes(inst.dict, inst.data, trace.powers).x;
    out.support = top_k_support(trace.powers, spec.K(), PeakMode::TopValues);
  } else {
    out.x_hat = capon_amplitudes(inst.dict, inst.data, trace.powers).x;
    out.support = top_k_support(trace.powers, spec.K(), PeakMode::LocalPeaks);
  }
  return out;
}

Outcome run_oracle_ls(const ExperimentSpec& spec, const Instance& inst) {
  Outcome out;
  out.support = SupportSet(spec.support, spec.M);
  out.x_hat = ls_refit(inst.dict, inst.data, out.support).x;
  return out;
}

Outcome run_beamformer(const ExperimentSpec& spec, const Instance& inst) {
  Outcome out;
  const PowerEstimate p = beamformer_baseline(inst.dict, inst.data);
  const CMatrix& B = inst.dict.regressors();
  out.x_hat = B.colwise().squaredNorm().transpose().cwiseInverse().asDiagonal() * (B.adjoint() * inst.data.data());
  out.support = top_k_support(p, spec.K(), PeakMode::LocalPeaks);
  return out;
}

TrialRecord failed_record(int trial, const std::string& label, const std::exception& e) {
  TrialRecord rec;
  rec.trial = trial;
  rec.algo = label;
  rec.failed = true;
  rec.error = e.what();
  return rec;
}

std::vector<TrialRecord> run_trial(const ExperimentSpec& spec, const RVector& grid, int trial) {
  std::vector<TrialRecord> records;
  std::optional<Instance> inst;
  try {
    inst.emplace(gen_instance(spec, trial));
  } catch (const std::exception& e) {
    for (const auto& a : spec.algorithms) records.push_back(failed_record(trial, a.label(), e));
    return records;
  }

  auto attempt = [&](const std::string& label, const std::function<Outcome()>& body) {
    TrialRecord rec;
    rec.trial = trial;
    rec.algo = label;
    try {
      score(spec, *inst, grid, body(), rec);
    } catch (const std::exception& e) {
      rec = failed_record(trial, label, e);
    }
    records.push_back(std::move(rec));
  };
  for (const auto& a : spec.algorithms) attempt(a.label(), [&] { return run_algorithm(spec, *inst, a); });
  attempt(kOracleLsLabel, [&] { return run_oracle_ls(spec, *inst); });
  if (spec.scenario == Scenario::UlaDoa) attempt(kBeamformerLabel, [&] { return run_beamformer(spec, *inst); });
  return records;
}

AlgorithmSummary summarize(const ExperimentSpec& spec, const std::string& algo, const std::vector<TrialRecord>& all) {
  AlgorithmSummary s;
  s.algo = algo;
  double sq = 0.0, energy = 0.0, doa = 0.0, wall = 0.0, iters = 0.0;
  int exact = 0, detected = 0;
  for (const auto& r : all) {
    if (r.algo != algo) continue;
    if (r.failed) {
      ++s.failures;
      continue;
    }
    ++s.completed;
    sq += r.sq_err;
    energy += r.signal_energy;
    doa += r.doa_sq_err;
    wall += r.wall_time_s;
    iters += r.iterations;
    exact += r.support_exact ? 1 : 0;
    detected += r.detected ? 1 : 0;
  }
  if (s.completed == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.normalized_mse = s.pd_support = s.doa_rmse_deg = s.pd_within_delta = s.mean_wall_time_s = s.mean_iterations = nan;
    return s;
  }
  const double n = s.completed;
  s.normalized_mse = energy > 0.0 ? sq / energy : 0.0;
  s.pd_support = exact / n;
  s.pd_within_delta = detected / n;
  s.doa_rmse_deg = spec.scenario == Scenario::UlaDoa ? std::sqrt(doa / (n * static_cast<double>(spec.K()))) : 0.0;
  s.mean_wall_time_s = wall / n;
  s.mean_iterations = iters / n;
  return s;
}

}  // namespace

std::string scenario_name(Scenario s) { return s == Scenario::IidRegression ? "iid" : "ula"; }

Scenario scenario_from_name(const std::string& name) {
  if (name == "iid") return Scenario::IidRegression;
  if (name == "ula" || name == "doa") return Scenario::UlaDoa;
  throw Error(ErrorKind::ConfigError, "unknown scenario '" + name + "'");
}

std::string AlgorithmSpec::label() const { return policy_name(policy) + "_" + step_name(step); }

double ExperimentSpec::noise_variance() const {
  double total = 0.0;
  for (double p : powers) total += p;
  return total / std::pow(10.0, snr_db / 10.0);
}

void ExperimentSpec::validate() const {
  if (N < 1 || M < 1) throw Error(ErrorKind::ConfigError, "N and M must be positive");
  if (support.empty()) throw Error(ErrorKind::ConfigError, "support must not be empty");
  if (support.size() != powers.size()) throw Error(ErrorKind::ConfigError, "support and powers differ in length");
  SupportSet check(support, M);
  for (double p : powers) {
    if (!(p > 0.0) || !std::isfinite(p)) throw Error(ErrorKind::ConfigError, "powers must be positive");
  }
  if (K() > M) throw Error(ErrorKind::ConfigError, "support larger than M");
  if (trials < 1) throw Error(ErrorKind::ConfigError, "trials must be at least 1");
  if (snapshots < 1) throw Error(ErrorKind::ConfigError, "snapshots must be at least 1");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw Error(ErrorKind::ConfigError, "snr_db must not be NaN or -inf");
  }
  if (algorithms.empty()) throw Error(ErrorKind::ConfigError, "no algorithms selected");
  std::set<std::string> labels;
  for (const auto& a : algorithms) {
    if (!labels.insert(a.label()).second) throw Error(ErrorKind::ConfigError, "duplicate algorithm " + a.label());
  }
  if (!(tol > 0.0) || max_iters < 1) throw Error(ErrorKind::ConfigError, "invalid tolerance or iteration cap");
  if (scenario == Scenario::UlaDoa) {
    if (!(angle_max_deg > angle_min_deg)) throw Error(ErrorKind::ConfigError, "empty angle range");
    if (M < 2) throw Error(ErrorKind::ConfigError, "DOA grid needs at least two points");
    if (!(delta_deg > 0.0)) throw Error(ErrorKind::ConfigError, "delta_deg must be positive");
  }
}

std::vector<AlgorithmSpec> default_algorithms() {
  return {{SpicePolicy{}, StepRule::VersionA},
          {LikesPolicy{}, StepRule::VersionA},
          {SlimPolicy{}, StepRule::VersionA},
          {IaaPolicy{}, StepRule::VersionA}};
}

RVector angle_grid(Index M, double lo_deg, double hi_deg) {
  if (M == 1) return RVector::Constant(1, lo_deg);
  return RVector::LinSpaced(M, lo_deg, hi_deg);
}

std::vector<Index> reference_support(Scenario scenario, Index M, double angle_min_deg, double angle_max_deg) {
  std::vector<Index> out;
  if (scenario == Scenario::IidRegression) {
    for (Index k : kReferenceSupport) out.push_back(std::max<Index>(1, (k * M + kReferenceGrid / 2) / kReferenceGrid) - 1);
    return out;
  }
  const RVector reference_grid = angle_grid(kReferenceGrid, -90.0, 90.0);
  const double step = (angle_max_deg - angle_min_deg) / static_cast<double>(M - 1);
  for (Index k : kReferenceSupport) {
    const double idx = std::round((reference_grid[k - 1] - angle_min_deg) / step);
    out.push_back(std::clamp<Index>(static_cast<Index>(idx), 0, M - 1));
  }
  return out;
}

std::vector<double> reference_powers() { return {1.0, 9.0, 4.0}; }

ExperimentSpec reference_spec(Scenario scenario, Index M, int trials) {
  ExperimentSpec spec;
  spec.scenario = scenario;
  spec.M = M;
  spec.trials = trials;
  spec.support = reference_support(scenario, M, spec.angle_min_deg, spec.angle_max_deg);
  spec.powers = reference_powers();
  spec.algorithms = default_algorithms();
  return spec;
}

CVector steering_vector(Index N, double theta_deg, double kappa) {
  const double phase = -kappa * std::sin(theta_deg * kDegToRad);
  CVector b(N);
  for (Index n = 0; n < N; ++n) b[n] = std::polar(1.0, phase * static_cast<double>(n));
  return b;
}

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ trial);
  h = splitmix64(h ^ (stream * 0xd1b54a32d192ed03ULL));
  return std::mt19937_64(h);
}

Instance gen_iid_instance(const ExperimentSpec& spec, int trial_index) {
  spec.validate();
  std::mt19937_64 rng = trial_rng(spec.seed, static_cast<std::uint64_t>(trial_index), 0);
  ComplexNormal cn;
  CMatrix B(spec.N, spec.M);
  for (Index j = 0; j < spec.M; ++j) {
    for (Index i = 0; i < spec.N; ++i) B(i, j) = cn(rng);
  }
  CMatrix x = draw_amplitudes(spec, rng);
  CMatrix Y = add_noise(B * x, spec.noise_variance(), rng);
  return Instance{Dictionary(std::move(B)), SnapshotSet(std::move(Y)), std::move(x), RVector()};
}

Instance gen_ula_instance(const ExperimentSpec& spec, int trial_index) {
  spec.validate();
  std::mt19937_64 rng = trial_rng(spec.seed, static_cast<std::uint64_t>(trial_index), 0);
  const RVector grid = angle_grid(spec.M, spec.angle_min_deg, spec.angle_max_deg);
  CMatrix B(spec.N, spec.M);
  for (Index k = 0; k < spec.M; ++k) B.col(k) = steering_vector(spec.N, grid[k], spec.kappa);
  CMatrix x = draw_amplitudes(spec, rng);
  CMatrix Y = add_noise(B * x, spec.noise_variance(), rng);
  RVector doas(spec.K());
  for (Index i = 0; i < doas.size(); ++i) doas[i] = grid[spec.support[static_cast<std::size_t>(i)]];
  std::sort(doas.begin(), doas.end());
  return Instance{Dictionary(std::move(B)), SnapshotSet(std::move(Y)), std::move(x), std::move(doas)};
}

Instance gen_instance(const ExperimentSpec& spec, int trial_index) {
  return spec.scenario == Scenario::IidRegression ? gen_iid_instance(spec, trial_index)
                                                  : gen_ula_instance(spec, trial_index);
}

PowerEstimate beamformer_baseline(const Dictionary& dict, const SnapshotSet& data) {
  return matched_filter_init(dict, data);
}

const AlgorithmSummary& ExperimentReport::summary(const std::string& algo) const {
  for (const auto& s : summaries) {
    if (s.algo == algo) return s;
  }
  throw Error(ErrorKind::ConfigError, "no summary for algorithm '" + algo + "'");
}

ExperimentReport run_experiment(const ExperimentSpec& spec, unsigned workers) {
  spec.validate();
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(spec.trials));
  const RVector grid = angle_grid(spec.M, spec.angle_min_deg, spec.angle_max_deg);

  std::vector<std::vector<TrialRecord>> per_trial(static_cast<std::size_t>(spec.trials));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int t = next.fetch_add(1); t < spec.trials; t = next.fetch_add(1)) {
      per_trial[static_cast<std::size_t>(t)] = run_trial(spec, grid, t);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  ExperimentReport report;
  report.spec = spec;
  for (auto& recs : per_trial) {
    for (auto& r : recs) {
      report.failures += r.failed ? 1 : 0;
      report.trials.push_back(std::move(r));
    }
  }
  std::vector<std::string> labels;
  for (const auto& a : spec.algorithms) labels.push_back(a.label());
  labels.emplace_back(kOracleLsLabel);
  if (spec.scenario == Scenario::UlaDoa) labels.emplace_back(kBeamformerLabel);
  for (const auto& l : labels) report.summaries.push_back(summarize(spec, l, report.trials));
  return report;
}

}  // namespace wspice
