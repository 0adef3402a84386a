#include "wspice/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wspice/amplitude.hpp"
#include "wspice/csv_io.hpp"
#include "wspice/errors.hpp"
#include "wspice/estimators.hpp"
#include "wspice/experiments.hpp"
#include "wspice/identifiability.hpp"
#include "wspice/serialize.hpp"
#include "wspice/verify.hpp"

namespace wspice {

namespace fs = std::filesystem;

namespace {

struct EstimateArgs {
  std::string B, y, out = ".";
  std::string algo = "spice";
  std::string step = "a";
  double tol = 1e-3;
  std::optional<int> max_iters;
  int likes_period = LikesPolicy{}.refresh_period;
  bool uniform_noise = false;
};

struct BenchmarkArgs {
  std::string spec;
  std::string out = ".";
  unsigned workers = 0;
  bool paper_scale = false;
};

struct IdentArgs {
  std::string B;
  std::string powers;
  std::uint64_t seed = 0;
  int subsets = 100;
};

unsigned default_workers() {
  if (const char* env = std::getenv("WSPICE_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::ConfigError, "cannot write " + path.string());
  f << std::setprecision(17);
  return f;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw Error(ErrorKind::ConfigError, "cannot create output directory " + dir.string());
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
  const Dictionary dict(csv::read_matrix(fs::path(a.B)));
  const SnapshotSet data(csv::read_matrix(fs::path(a.y)));
  if (data.rows() != dict.rows()) throw Error(ErrorKind::DimensionMismatch, "B and y have different row counts");

  EstimatorConfig config;
  config.policy = policy_from_name(a.algo);
  config.step = step_from_name(a.step);
  config.tol = a.tol;
  config.uniform_noise = a.uniform_noise;
  if (auto* l = std::get_if<LikesPolicy>(&config.policy)) l->refresh_period = a.likes_period;
  if (auto* s = std::get_if<SlimPolicy>(&config.policy)) {
    if (a.max_iters) s->max_iters = *a.max_iters;
    config.max_iters = s->max_iters;
  } else if (a.max_iters) {
    config.max_iters = *a.max_iters;
  }

  const EstimationTrace trace = std::holds_alternative<LikesPolicy>(config.policy)
                                    ? estimate_likes_from_spice(dict, data, config)
                                    : estimate(dict, data, config);

  const fs::path dir(a.out);
  ensure_dir(dir);
  csv::write_real_matrix(dir / "powers.csv", trace.powers.values());
  csv::write_matrix(dir / "x_lmmse.csv", lmmse_amplitudes(dict, data, trace.powers).x);
  csv::write_matrix(dir / "x_capon.csv", capon_amplitudes(dict, data, trace.powers).x);
  open_out(dir / "trace.json") << to_json(trace).dump(2) << '\n';

  out << policy_name(trace.policy) << '_' << step_name(trace.step) << ": " << trace.iterations_run << " iterations, "
      << termination_name(trace.termination) << '\n';
  return trace.termination == Termination::MaxIters ? kExitMaxIters : kExitOk;
}

void print_summary(std::ostream& out, const ExperimentReport& rep) {
  const bool doa = rep.spec.scenario == Scenario::UlaDoa;
  char line[160];
  std::snprintf(line, sizeof line, "%s  N=%ld M=%ld snr=%g dB  trials=%d  failures=%d\n",
                scenario_name(rep.spec.scenario).c_str(), static_cast<long>(rep.spec.N),
                static_cast<long>(rep.spec.M), rep.spec.snr_db, rep.spec.trials, rep.failures);
  out << line;
  std::snprintf(line, sizeof line, "  %-12s %12s %8s %10s %9s %10s\n", "algo", "nmse", "pd", doa ? "rmse_deg" : "-",
                "iters", "time_s");
  out << line;
  for (const auto& s : rep.summaries) {
    std::snprintf(line, sizeof line, "  %-12s %12.4e %8.3f %10.4f %9.1f %10.3e\n", s.algo.c_str(), s.normalized_mse,
                  doa ? s.pd_within_delta : s.pd_support, doa ? s.doa_rmse_deg : 0.0, s.mean_iterations,
                  s.mean_wall_time_s);
    out << line;
  }
}

int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out) {
  std::ifstream in(a.spec);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open spec file " + a.spec);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedInput, a.spec + ": " + e.what());
  }
  if (a.paper_scale && j.is_object()) {
    j["M"] = 1000;
    j["trials"] = 1000;
  }
  const std::vector<ExperimentSpec> specs = specs_from_json(j);

  const fs::path dir(a.out);
  ensure_dir(dir);
  const unsigned workers = a.workers > 0 ? a.workers : default_workers();
  std::vector<ExperimentReport> reports;
  for (const auto& spec : specs) {
    reports.push_back(run_experiment(spec, workers));
    print_summary(out, reports.back());
  }
  open_out(dir / "report.json") << to_json(reports).dump(2) << '\n';
  auto trials = open_out(dir / "trials.csv");
  write_trials_csv(trials, reports);
  auto timings = open_out(dir / "timings.csv");
  write_timings_csv(timings, reports);
  return kExitOk;
}

int cmd_identifiability(const IdentArgs& a, std::ostream& out) {
  const Dictionary dict(csv::read_matrix(fs::path(a.B)));
  std::optional<PowerEstimate> p;
  if (!a.powers.empty()) {
    const RMatrix v = csv::read_real_matrix(fs::path(a.powers));
    if (v.size() != dict.atoms()) {
      throw Error(ErrorKind::DimensionMismatch, "power file must hold M+N = " + std::to_string(dict.atoms()) + " values");
    }
    p = PowerEstimate(Eigen::Map<const RVector>(v.data(), v.size()), dict.signals());
  }
  const UniquenessReport report = classify_uniqueness(dict, p, a.seed, a.subsets);
  out << to_json(report).dump(2) << '\n';
  switch (report.verdict) {
    case Verdict::Unique:
    case Verdict::GenericallyUnique:
      return kExitOk;
    case Verdict::NotUnique:
      return kExitNotUnique;
    case Verdict::Indeterminate:
      break;
  }
  return kExitIndeterminate;
}

int cmd_verify(const VerifyOptions& o, std::ostream& out) {
  const auto checks = run_verify(o);
  print_checks(out, checks);
  for (const auto& c : checks) {
    if (!c.passed) return kExitCheckFailed;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse parameter estimation by weighted SPICE (SPICE, LIKES, SLIM, IAA)", "wspice"};
  app.require_subcommand(1);

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Estimate powers and amplitudes from B and y");
  e->add_option("-B,--regressors", est.B, "N x M complex CSV")->required()->check(CLI::ExistingFile);
  e->add_option("-y,--data", est.y, "N x T complex CSV")->required()->check(CLI::ExistingFile);
  e->add_option("-o,--out", est.out, "Output directory")->capture_default_str();
  e->add_option("--algo", est.algo, "spice | likes | slim | iaa")
      ->check(CLI::IsMember({"spice", "likes", "slim", "iaa"}))
      ->capture_default_str();
  e->add_option("--step", est.step, "a | b")->check(CLI::IsMember({"a", "b"}))->capture_default_str();
  e->add_option("--tol", est.tol, "Relative change tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  e->add_option("--max-iters", est.max_iters, "Iteration cap (default 1000, slim 5)")->check(CLI::PositiveNumber);
  e->add_option("--likes-period", est.likes_period, "LIKES weight refresh period")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  e->add_flag("--uniform-noise", est.uniform_noise, "One shared noise power");

  BenchmarkArgs bench;
  auto* b = app.add_subcommand("benchmark", "Run a Monte Carlo experiment from a JSON spec");
  b->add_option("spec", bench.spec, "Experiment spec JSON")->required()->check(CLI::ExistingFile);
  b->add_option("-o,--out", bench.out, "Output directory")->capture_default_str();
  b->add_option("--workers", bench.workers, "Worker threads (default: WSPICE_WORKERS or 1)");
  b->add_flag("--paper-scale", bench.paper_scale, "Override M = 1000 and trials = 1000");

  IdentArgs ident;
  auto* id = app.add_subcommand("identifiability", "Classify uniqueness of R = A diag(p) A*");
  id->add_option("-B,--regressors", ident.B, "N x M complex CSV")->required()->check(CLI::ExistingFile);
  id->add_option("-p,--powers", ident.powers, "M+N real CSV of powers")->check(CLI::ExistingFile);
  id->add_option("--seed", ident.seed, "Subset sampling seed")->capture_default_str();
  id->add_option("--subsets", ident.subsets, "Random N-column subsets to test")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  VerifyOptions ver;
  auto* v = app.add_subcommand("verify", "Cross-check estimators against oracles and identities");
  v->add_option("--seed", ver.seed, "Instance seed")->capture_default_str();
  v->add_option("--n", ver.n, "Rows of B")->capture_default_str();
  v->add_option("--m", ver.m, "Columns of B")->capture_default_str();
  v->add_option("--instances", ver.instances, "Random instances")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    return app.exit(pe, out, err) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*e) return cmd_estimate(est, out);
    if (*b) return cmd_benchmark(bench, out);
    if (*id) return cmd_identifiability(ident, out);
    return cmd_verify(ver, out);
  } catch (const Error& ex) {
    err << "error [" << to_string(ex.kind()) << "]: " << ex.what() << '\n';
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
  }
  return kExitError;
}

}  // namespace wspice
