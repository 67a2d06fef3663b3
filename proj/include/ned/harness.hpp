// Comparison runs, trace and plot output, and the validation suites.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ned/flow.hpp"

namespace ned {

/// Run configuration. JSON schema (all keys optional except "preset"):
///
///   {
///     "preset": "normsq_d2",          // registered name, "_smoke" allowed
///     "smoke": false,                 // use the quarter-size variant
///     "methods": ["ned_fe", "ned_rk2", "sgd"],
///     "seed": 1,
///     "out": "runs/normsq_d2",
///     "threads": 1,
///     "parallel_methods": false,
///     "checkpoint_every": 0,          // write <method>_epoch<k>.json every k epochs
///     "trainer": { ... },             // TrainerConfig fields for every method
///     "per_method": { "sgd": { ... } }
///   }
///
/// TrainerConfig fields: tau0, q, epochs, rel_tol, lambda, schedule, pde_form,
/// resample, samples, boundary_samples, eval_points, divergence_factor,
/// record_wall_time, time_budget_s.
struct RunConfig {
  std::string preset;
  bool smoke = false;
  std::vector<Method> methods{Method::ned_fe, Method::ned_rk2, Method::sgd};
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int threads = 1;
  bool parallel_methods = false;
  int checkpoint_every = 0;
  nlohmann::json trainer = nlohmann::json::object();
  nlohmann::json per_method = nlohmann::json::object();

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  std::string preset_name() const;
  /// Problem defaults, then "trainer", then the method's "per_method" entry.
  TrainerConfig trainer_for(const ProblemDef& problem, Method m) const;
  void validate() const;
};

/// Applies the fields present in `j` to `cfg`; unknown keys are rejected.
void apply_trainer_json(TrainerConfig& cfg, const nlohmann::json& j);

struct MethodResult {
  std::string name;
  double final_rel_l2 = 0.0;
  std::string trace_path;
  FlowTrace trace;
};

struct ComparisonReport {
  std::string preset;
  std::vector<MethodResult> methods;
  std::vector<std::string> verdicts;
  std::uint64_t seed = 0;
  bool completed = true;  ///< no trainer aborted

  nlohmann::json to_json() const;
};

/// Pairwise statements "a < b at final epoch" / "a >= b at final epoch"
/// for every ordered pair in method order.
std::vector<std::string> ordering_verdicts(const std::vector<MethodResult>& methods);

/// Every method starts from init_params(net, seed) and is measured on the
/// same evaluation set. Writes <out>/<method>.csv and <out>/report.json.
ComparisonReport run(const RunConfig& config);

/// <out>/<method>_rel_l2.csv (epoch,rel_l2) per method and <out>/plot.gp.
/// Returns the paths written.
std::vector<std::string> emit_plotdata(const ComparisonReport& report, const std::string& out_dir);

nlohmann::json version_info();

struct SuiteCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<SuiteCheck> checks;
  std::vector<std::string> notes;  ///< informational findings that do not gate
  double seconds = 0.0;

  bool passed() const;
  std::string text() const;
};

/// FD agreement (1e-5) of parameter Jacobians, Laplacians and residual
/// Jacobians over `draws` random (theta, x) pairs per preset architecture.
SuiteReport check_derivatives(int draws = 100);
/// Richardson ratios on the constant-parameter model.
SuiteReport check_integrator_orders();
/// J1 along NED runs of the constant-parameter model.
SuiteReport check_energy_monotonicity();
SuiteReport check_pinv();
SuiteReport check_constructions();

/// suite in {deriv, linalg, constructions, integrators}.
SuiteReport validate_suite(const std::string& suite);
std::vector<std::string> suite_names();

}  // namespace ned
