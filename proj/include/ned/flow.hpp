#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ned/deriv.hpp"
#include "ned/net.hpp"
#include "ned/problems.hpp"

namespace ned {

enum class Method { ned_fe, ned_rk2, sgd };
enum class Schedule { cosine, constant };

/// How PDE interior rows are posed.
///   residual:  A = grad_theta R(X_in), b = -R    (linearized residual, Gauss-Newton)
///   evolution: A = grad_theta U(X_in), b = R     (U_t = R projected on the tangent space)
/// Boundary rows are grad_theta U, b = -(U - h) in both.
enum class PdeForm { residual, evolution };

enum class Resample { every_epoch, fixed };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
std::string to_string(Schedule s);
Schedule schedule_from_string(const std::string& s);
std::string to_string(PdeForm f);
PdeForm pde_form_from_string(const std::string& s);
std::string to_string(Resample r);
Resample resample_from_string(const std::string& s);

struct TrainerConfig {
  Method method = Method::ned_fe;
  double tau0 = 1e-3;
  double q = 0.5;
  int epochs = 1;             ///< K
  double rel_tol = 0.0;       ///< pinv cutoff; 0 selects max(rows, cols) * eps
  double lambda = 1.0;        ///< SGD boundary penalty
  Schedule schedule = Schedule::cosine;
  PdeForm pde_form = PdeForm::residual;
  Resample resample = Resample::every_epoch;
  int samples = 0;            ///< 0: take from the problem
  int boundary_samples = -1;  ///< -1: take from the problem
  int eval_points = 0;        ///< 0: take from the problem
  int threads = 1;
  double divergence_factor = 1e6;
  bool record_wall_time = false;  ///< wall_s is written as 0 otherwise, keeping traces reproducible
  double time_budget_s = 0.0;     ///< abort once exceeded; 0 disables
  int stop_epoch = -1;            ///< record this epoch and return without stepping; -1 runs to K

  /// Throws std::invalid_argument unless tau0 > 0, epochs >= 0, q in (0, 1].
  void validate() const;
  std::string canonical() const;  ///< stable text form, hashed into the trace
};

struct ResidualSystem {
  DenseMatrix a;
  Vector b;
  std::vector<RowKind> tags;  ///< interior rows first
  std::vector<std::string> warnings;

  Eigen::Index interior_rows() const;
};

/// q tau0 (cos(pi n / K) + 1), or tau0 for the constant schedule.
double lr_schedule(int n, const TrainerConfig& cfg);

/// A = grad_theta U(X), b = y - U(X).
ResidualSystem assemble_supervised(const Network& net, const ParamVec& theta, const PointSet& x, const Vector& y,
                                   const AssemblyOptions& opts = {});

/// Interior rows per `form`, then boundary rows for X_bd. Boundary rows under
/// an active ansatz are identically zero and produce a warning.
ResidualSystem assemble_pde(const ProblemDef& problem, const Network& net, const ParamVec& theta,
                            const PointSet& x_in, const PointSet& x_bd, PdeForm form = PdeForm::residual,
                            const AssemblyOptions& opts = {});

struct Direction {
  Vector alpha;
  Eigen::Index rank = 0;
  bool rank_zero = false;
};

/// alpha = A^+ b. rel_tol <= 0 selects the default cutoff.
Direction ned_direction(const ResidualSystem& sys, double rel_tol = 0.0);

Vector fe_step(const Vector& theta, const Vector& gamma, double eta);

/// phi1 = eta gamma(theta), phi2 = eta gamma(theta + phi1 / 2), theta + phi2.
Vector rk2_step(const Vector& theta, const std::function<Vector(const Vector&)>& gamma, double eta);

/// theta + eta (2/N) grad_theta U^T (y - U).
ParamVec sgd_step_supervised(const Network& net, const ParamVec& theta, const PointSet& x, const Vector& y,
                             double eta, const AssemblyOptions& opts = {});

/// theta - eta grad_theta[(1/N) sum R^2 + (lambda/M) sum B^2]; the boundary
/// term is skipped when the network carries an ansatz.
ParamVec sgd_step_pde(const ProblemDef& problem, const Network& net, const ParamVec& theta, const PointSet& x_in,
                      const PointSet& x_bd, double eta, double lambda, const AssemblyOptions& opts = {});

struct FlowRecord {
  int epoch = 0;
  double lr = 0.0;
  double rel_l2 = 0.0;
  double residual_rms = 0.0;
  double energy = 0.0;
  double wall_s = 0.0;
};

struct FlowTrace {
  std::vector<FlowRecord> records;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  bool energy_surrogate = false;  ///< energy column holds the residual RMS
  bool aborted = false;
  std::string abort_reason;
  double rms_reference = 0.0;  ///< residual RMS the divergence guard compares against
  ParamVec theta;  ///< parameters after the last recorded epoch
};

/// CSV with header epoch,lr,rel_l2,residual_rms,energy,wall_s and %.17g values.
void write_trace_csv(const FlowTrace& trace, std::ostream& os);
std::string trace_csv(const FlowTrace& trace);

/// Epoch n draws its samples from derive_seed(seed, "interior"/"boundary", n)
/// and e_u is measured on one evaluation set from derive_seed(seed, "eval").
/// Records are written for epochs start_epoch..K; record n holds the state
/// before step n, its lr is tau_n. Starting at epoch k from the parameters
/// recorded at k reproduces the tail of an uninterrupted run, provided the
/// divergence guard is given the earlier run's reference (0: the residual RMS
/// at start_epoch).
FlowTrace train(const ProblemDef& problem, const Network& net, const ParamVec& theta0, const TrainerConfig& cfg,
                std::uint64_t seed, int start_epoch = 0, double rms_reference = 0.0);

/// Builds the problem's network and draws theta0 with init_params(net, seed).
FlowTrace train(const ProblemDef& problem, const TrainerConfig& cfg, std::uint64_t seed);

/// Trainer settings for `method` with the problem's hyperparameters.
TrainerConfig config_for(const ProblemDef& problem, Method method);

}  // namespace ned
