#include "wspice/serialize.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <set>

#include "wspice/errors.hpp"

namespace wspice {

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json numbers(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

Json numbers(const RVector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(number(v[i]));
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorKind::ConfigError, "experiment spec: " + msg); }

template <class T>
T get_as(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    bad(std::string("key '") + key + "' has the wrong type");
  }
}

Index get_positive_index(const Json& j, const char* key) {
  if (!j.at(key).is_number_integer()) bad(std::string("key '") + key + "' must be an integer");
  const auto v = j.at(key).get<long long>();
  if (v < 1) bad(std::string("key '") + key + "' must be positive");
  return static_cast<Index>(v);
}

}  // namespace

Json to_json(const EstimationTrace& trace) {
  Json j;
  j["policy"] = policy_name(trace.policy);
  j["step"] = step_name(trace.step);
  j["uniform_noise"] = trace.uniform_noise;
  j["iterations"] = trace.iterations_run;
  j["termination"] = termination_name(trace.termination);
  j["cost_history"] = numbers(trace.cost_history);
  j["surrogate_history"] = trace.surrogate_history ? numbers(*trace.surrogate_history) : Json(nullptr);
  j["powers"] = numbers(trace.powers.values());
  j["signal_count"] = trace.powers.signal_count();
  j["wall_time_s"] = number(trace.wall_time_s);
  return j;
}

Json to_json(const UniquenessReport& report) {
  Json j;
  j["verdict"] = verdict_name(report.verdict);
  j["kr_rank"] = report.kr_rank;
  j["threshold_check"] = report.threshold_check;
  j["witness"] = report.witness ? numbers(*report.witness) : Json(nullptr);
  j["subsets_tested"] = report.subsets_tested;
  j["rationale"] = report.rationale;
  return j;
}

Json to_json(const oracle::ConvexSolveResult& result) {
  Json x = Json::array();
  for (Index i = 0; i < result.x.size(); ++i) x.push_back({number(result.x[i].real()), number(result.x[i].imag())});
  return Json{{"x", x},
              {"objective", number(result.objective)},
              {"iterations", result.iterations},
              {"certificate", number(result.certificate)}};
}

Json to_json(const ExperimentSpec& spec) {
  Json j;
  j["scenario"] = scenario_name(spec.scenario);
  j["N"] = spec.N;
  j["M"] = spec.M;
  Json support = Json::array();
  for (Index k : spec.support) support.push_back(k + 1);
  j["support"] = support;
  j["powers"] = numbers(spec.powers);
  j["snr_db"] = number(spec.snr_db);
  j["trials"] = spec.trials;
  j["seed"] = spec.seed;
  j["snapshots"] = spec.snapshots;
  Json algos = Json::array();
  for (const auto& a : spec.algorithms) algos.push_back(a.label());
  j["algorithms"] = algos;
  j["tol"] = spec.tol;
  j["max_iters"] = spec.max_iters;
  if (spec.scenario == Scenario::UlaDoa) {
    j["kappa"] = spec.kappa;
    j["angle_range"] = {spec.angle_min_deg, spec.angle_max_deg};
    j["delta_deg"] = spec.delta_deg;
  }
  return j;
}

Json to_json(const ExperimentReport& report) {
  Json j;
  j["spec"] = to_json(report.spec);
  j["failures"] = report.failures;
  Json summaries = Json::array();
  for (const auto& s : report.summaries) {
    summaries.push_back({{"algo", s.algo},
                         {"normalized_mse", number(s.normalized_mse)},
                         {"pd_support", number(s.pd_support)},
                         {"doa_rmse_deg", number(s.doa_rmse_deg)},
                         {"pd_within_delta", number(s.pd_within_delta)},
                         {"mean_wall_time_s", number(s.mean_wall_time_s)},
                         {"mean_iterations", number(s.mean_iterations)},
                         {"completed", s.completed},
                         {"failures", s.failures}});
  }
  j["summaries"] = summaries;
  Json errors = Json::array();
  for (const auto& r : report.trials) {
    if (r.failed) errors.push_back({{"trial", r.trial}, {"algo", r.algo}, {"error", r.error}});
  }
  j["errors"] = errors;
  return j;
}

Json to_json(const std::vector<ExperimentReport>& reports) {
  Json out = Json::array();
  for (const auto& r : reports) out.push_back(to_json(r));
  return out;
}

AlgorithmSpec algorithm_from_label(const std::string& label) {
  const auto sep = label.rfind('_');
  if (sep == std::string::npos) return {policy_from_name(label), StepRule::VersionA};
  return {policy_from_name(label.substr(0, sep)), step_from_name(label.substr(sep + 1))};
}

std::vector<ExperimentSpec> specs_from_json(const Json& j) {
  if (!j.is_object()) bad("top level must be an object");
  static const std::set<std::string> known = {
      "scenario", "N",      "M",         "support",    "powers",   "snr_db",
      "trials",   "seed",   "snapshots", "algorithms", "tol",      "max_iters",
      "kappa",    "angle_range", "delta_deg", "likes_refresh_period", "slim_max_iters"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) bad("unknown key '" + key + "'");
  }
  if (!j.contains("scenario")) bad("missing 'scenario'");

  ExperimentSpec spec;
  try {
    spec.scenario = scenario_from_name(get_as<std::string>(j, "scenario"));
  } catch (const Error& e) {
    bad(e.what());
  }
  if (j.contains("N")) spec.N = get_positive_index(j, "N");
  if (j.contains("M")) spec.M = get_positive_index(j, "M");
  if (j.contains("trials")) spec.trials = static_cast<int>(get_positive_index(j, "trials"));
  if (j.contains("snapshots")) spec.snapshots = get_positive_index(j, "snapshots");
  if (j.contains("seed")) spec.seed = get_as<std::uint64_t>(j, "seed");
  if (j.contains("tol")) spec.tol = get_as<double>(j, "tol");
  if (j.contains("max_iters")) spec.max_iters = static_cast<int>(get_positive_index(j, "max_iters"));
  if (j.contains("kappa")) spec.kappa = get_as<double>(j, "kappa");
  if (j.contains("delta_deg")) spec.delta_deg = get_as<double>(j, "delta_deg");
  if (j.contains("angle_range")) {
    const auto r = get_as<std::vector<double>>(j, "angle_range");
    if (r.size() != 2) bad("'angle_range' must have two entries");
    spec.angle_min_deg = r[0];
    spec.angle_max_deg = r[1];
  }

  if (j.contains("support")) {
    for (long long k : get_as<std::vector<long long>>(j, "support")) {
      if (k < 1 || k > spec.M) bad("support index " + std::to_string(k) + " outside 1.." + std::to_string(spec.M));
      spec.support.push_back(static_cast<Index>(k - 1));
    }
  } else {
    spec.support = reference_support(spec.scenario, spec.M, spec.angle_min_deg, spec.angle_max_deg);
  }
  if (j.contains("powers")) {
    spec.powers = get_as<std::vector<double>>(j, "powers");
  } else {
    spec.powers = reference_powers();
  }
  if (spec.powers.size() != spec.support.size()) bad("'powers' and 'support' differ in length");

  int likes_period = LikesPolicy{}.refresh_period;
  int slim_cap = SlimPolicy{}.max_iters;
  if (j.contains("likes_refresh_period")) likes_period = static_cast<int>(get_positive_index(j, "likes_refresh_period"));
  if (j.contains("slim_max_iters")) slim_cap = static_cast<int>(get_positive_index(j, "slim_max_iters"));
  if (j.contains("algorithms")) {
    for (const auto& label : get_as<std::vector<std::string>>(j, "algorithms")) {
      try {
        spec.algorithms.push_back(algorithm_from_label(label));
      } catch (const Error& e) {
        bad(e.what());
      }
    }
  } else {
    spec.algorithms = default_algorithms();
  }
  for (auto& a : spec.algorithms) {
    if (auto* l = std::get_if<LikesPolicy>(&a.policy)) l->refresh_period = likes_period;
    if (auto* s = std::get_if<SlimPolicy>(&a.policy)) s->max_iters = slim_cap;
  }

  std::vector<double> snrs;
  if (j.contains("snr_db")) {
    if (j.at("snr_db").is_array()) {
      snrs = get_as<std::vector<double>>(j, "snr_db");
      if (snrs.empty()) bad("'snr_db' array is empty");
    } else {
      snrs.push_back(get_as<double>(j, "snr_db"));
    }
  } else {
    snrs.push_back(spec.snr_db);
  }

  std::vector<ExperimentSpec> out;
  for (double snr : snrs) {
    spec.snr_db = snr;
    spec.validate();
    out.push_back(spec);
  }
  return out;
}

void write_trials_csv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  out << "snr_db,trial,algo,nmse,pd,doa_sq_err_deg2,iters,failed\n";
  for (const auto& rep : reports) {
    const std::string snr = fmt(rep.spec.snr_db);
    for (const auto& r : rep.trials) {
      out << snr << ',' << r.trial << ',' << r.algo << ',';
      if (r.failed) {
        out << "nan,nan,nan,nan,1\n";
        continue;
      }
      out << fmt(r.nmse()) << ',' << (r.detected ? 1 : 0) << ',' << fmt(r.doa_sq_err) << ',' << r.iterations
          << ",0\n";
    }
  }
}

void write_timings_csv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  out << "snr_db,trial,algo,wall_time_s\n";
  for (const auto& rep : reports) {
    const std::string snr = fmt(rep.spec.snr_db);
    for (const auto& r : rep.trials) out << snr << ',' << r.trial << ',' << r.algo << ',' << fmt(r.wall_time_s) << '\n';
  }
}

}  // namespace wspice
