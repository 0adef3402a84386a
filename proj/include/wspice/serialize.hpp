#pragma once

// JSON and CSV encodings for traces, reports and experiment specs. Non-finite
// numbers are written as JSON null.

#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "wspice/estimators.hpp"
#include "wspice/experiments.hpp"
#include "wspice/identifiability.hpp"
#include "wspice/oracle.hpp"

namespace wspice {

using Json = nlohmann::json;

Json to_json(const EstimationTrace& trace);
Json to_json(const UniquenessReport& report);
Json to_json(const oracle::ConvexSolveResult& result);
Json to_json(const ExperimentSpec& spec);
Json to_json(const ExperimentReport& report);
Json to_json(const std::vector<ExperimentReport>& reports);

/// Experiment spec file. Recognized keys:
///
///   scenario        "iid" | "ula"                       (required)
///   N, M            integers                            (35, 200)
///   support         1-based column indices              (reference layout for M)
///   powers          |x_k|² per support entry            ({1, 9, 4})
///   snr_db          number or array of numbers          (20)
///   trials, seed, snapshots                             (100, 1, 1)
///   algorithms      ["spice_a", "iaa_b", ...]           (four policies, step a)
///   tol, max_iters                                      (1e-3, 1000)
///   likes_refresh_period, slim_max_iters                (30, 5)
///   kappa, angle_range [lo, hi], delta_deg              (pi, [-90, 90], 1.8)
///
/// An array snr_db expands into one spec per value. Unknown keys and bad values
/// throw ConfigError.
std::vector<ExperimentSpec> specs_from_json(const Json& j);

/// "spice_a" style label to an algorithm.
AlgorithmSpec algorithm_from_label(const std::string& label);

/// One row per trial and algorithm: snr_db,trial,algo,nmse,pd,doa_sq_err_deg2,iters,failed.
/// Contains no timing, so equal inputs give byte-identical files.
void write_trials_csv(std::ostream& out, const std::vector<ExperimentReport>& reports);
/// snr_db,trial,algo,wall_time_s.
void write_timings_csv(std::ostream& out, const std::vector<ExperimentReport>& reports);

}  // namespace wspice
