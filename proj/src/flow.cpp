#include "ned/flow.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ned/rng.hpp"

namespace ned {

std::string to_string(Method m) {
  switch (m) {
    case Method::ned_fe: return "ned_fe";
    case Method::ned_rk2: return "ned_rk2";
    case Method::sgd: return "sgd";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "ned_fe") return Method::ned_fe;
  if (s == "ned_rk2") return Method::ned_rk2;
  if (s == "sgd") return Method::sgd;
  throw std::invalid_argument("unknown method '" + s + "'");
}

std::string to_string(Schedule s) { return s == Schedule::cosine ? "cosine" : "constant"; }

Schedule schedule_from_string(const std::string& s) {
  if (s == "cosine") return Schedule::cosine;
  if (s == "constant") return Schedule::constant;
  throw std::invalid_argument("unknown schedule '" + s + "'");
}

std::string to_string(PdeForm f) { return f == PdeForm::evolution ? "evolution" : "residual"; }

PdeForm pde_form_from_string(const std::string& s) {
  if (s == "evolution") return PdeForm::evolution;
  if (s == "residual") return PdeForm::residual;
  throw std::invalid_argument("unknown pde_form '" + s + "'");
}

std::string to_string(Resample r) { return r == Resample::every_epoch ? "every_epoch" : "fixed"; }

Resample resample_from_string(const std::string& s) {
  if (s == "every_epoch") return Resample::every_epoch;
  if (s == "fixed") return Resample::fixed;
  throw std::invalid_argument("unknown resampling policy '" + s + "'");
}

void TrainerConfig::validate() const {
  if (!(tau0 > 0.0) || !std::isfinite(tau0)) throw std::invalid_argument("TrainerConfig: tau0 must be > 0");
  if (epochs < 0) throw std::invalid_argument("TrainerConfig: epochs must be >= 0");
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("TrainerConfig: q must lie in (0, 1]");
  if (rel_tol < 0.0 || rel_tol >= 1.0) throw std::invalid_argument("TrainerConfig: rel_tol must lie in [0, 1)");
  if (lambda < 0.0) throw std::invalid_argument("TrainerConfig: lambda must be >= 0");
  if (threads < 1) throw std::invalid_argument("TrainerConfig: threads must be >= 1");
  if (!(divergence_factor > 1.0)) throw std::invalid_argument("TrainerConfig: divergence_factor must be > 1");
  if (stop_epoch > epochs) throw std::invalid_argument("TrainerConfig: stop_epoch beyond epochs");
}

std::string TrainerConfig::canonical() const {
  // threads, wall-time, budget and stop settings do not change the trace and are left out
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "method=%s;tau0=%.17g;q=%.17g;epochs=%d;rel_tol=%.17g;lambda=%.17g;schedule=%s;pde_form=%s;"
                "resample=%s;samples=%d;boundary_samples=%d;eval_points=%d;divergence_factor=%.17g",
                to_string(method).c_str(), tau0, q, epochs, rel_tol, lambda, to_string(schedule).c_str(),
                to_string(pde_form).c_str(), to_string(resample).c_str(), samples, boundary_samples, eval_points,
                divergence_factor);
  return buf;
}

Eigen::Index ResidualSystem::interior_rows() const {
  Eigen::Index n = 0;
  for (RowKind t : tags) n += t == RowKind::interior;
  return n;
}

double lr_schedule(int n, const TrainerConfig& cfg) {
  if (n < 0 || n > cfg.epochs) throw std::invalid_argument("lr_schedule: epoch outside [0, K]");
  if (cfg.schedule == Schedule::constant) return cfg.tau0;
  if (cfg.epochs == 0) return 2.0 * cfg.q * cfg.tau0;
  if (n == cfg.epochs) return 0.0;
  return cfg.q * cfg.tau0 * (std::cos(std::numbers::pi * n / cfg.epochs) + 1.0);
}

ResidualSystem assemble_supervised(const Network& net, const ParamVec& theta, const PointSet& x, const Vector& y,
                                   const AssemblyOptions& opts) {
  if (x.cols() == 0) throw std::invalid_argument("assemble_supervised: empty sample set");
  if (y.size() != x.cols()) throw std::invalid_argument("assemble_supervised: |X| != |y|");
  ResidualSystem sys;
  sys.a = param_jacobian(net, theta, x, opts).a;
  sys.b = y - forward_batch(net, theta, x);
  sys.tags.assign(x.cols(), RowKind::interior);
  return sys;
}

ResidualSystem assemble_pde(const ProblemDef& problem, const Network& net, const ParamVec& theta,
                            const PointSet& x_in, const PointSet& x_bd, PdeForm form, const AssemblyOptions& opts) {
  if (problem.kind != ProblemKind::pde_steady) throw std::invalid_argument("assemble_pde: not a PDE problem");
  if (x_in.cols() + x_bd.cols() == 0) throw std::invalid_argument("assemble_pde: empty sample set");
  const Eigen::Index n = x_in.cols(), m = x_bd.cols(), p = net.num_params();
  ResidualSystem sys;
  sys.a.resize(n + m, p);
  sys.b.resize(n + m);
  if (n > 0) {
    if (form == PdeForm::residual) {
      auto [jac, res] = pde_residual_jacobian(problem.pde, net, theta, x_in, opts);
      sys.a.topRows(n) = jac.a;
      sys.b.head(n) = -res.r;
    } else {
      sys.a.topRows(n) = param_jacobian(net, theta, x_in, opts).a;
      sys.b.head(n) = pde_residual(problem.pde, net, theta, x_in, opts).r;
    }
  }
  if (m > 0) {
    if (net.has_ansatz())
      sys.warnings.push_back("boundary rows requested with an active ansatz; they are identically zero");
    sys.a.bottomRows(m) = param_jacobian(net, theta, x_bd, opts).a;
    sys.b.tail(m) = target_values(problem, x_bd) - forward_batch(net, theta, x_bd);
  }
  sys.tags.assign(n, RowKind::interior);
  sys.tags.insert(sys.tags.end(), m, RowKind::boundary);
  return sys;
}

Direction ned_direction(const ResidualSystem& sys, double rel_tol) {
  const double tol = rel_tol > 0.0 ? rel_tol : default_rel_tol(sys.a.rows(), sys.a.cols());
  PinvResult r = pinv_solve(sys.a, sys.b, tol);
  return {std::move(r.x), r.rank, r.rank_zero};
}

Vector fe_step(const Vector& theta, const Vector& gamma, double eta) {
  if (gamma.size() != theta.size()) throw std::invalid_argument("fe_step: direction length mismatch");
  return theta + eta * gamma;
}

Vector rk2_step(const Vector& theta, const std::function<Vector(const Vector&)>& gamma, double eta) {
  const Vector phi1 = eta * gamma(theta);
  const Vector phi2 = eta * gamma(theta + 0.5 * phi1);
  return theta + phi2;
}

ParamVec sgd_step_supervised(const Network& net, const ParamVec& theta, const PointSet& x, const Vector& y,
                             double eta, const AssemblyOptions& opts) {
  if (x.cols() == 0) throw std::invalid_argument("sgd_step_supervised: empty sample set");
  if (y.size() != x.cols()) throw std::invalid_argument("sgd_step_supervised: |X| != |y|");
  const Vector w = (2.0 / static_cast<double>(x.cols())) * (y - forward_batch(net, theta, x));
  return theta.with_values(theta.values + eta * weighted_param_gradient(net, theta, x, w, opts));
}

ParamVec sgd_step_pde(const ProblemDef& problem, const Network& net, const ParamVec& theta, const PointSet& x_in,
                      const PointSet& x_bd, double eta, double lambda, const AssemblyOptions& opts) {
  Vector grad = Vector::Zero(net.num_params());
  if (x_in.cols() > 0) {
    const Vector r = pde_residual(problem.pde, net, theta, x_in, opts).r;
    const Vector w = (2.0 / static_cast<double>(x_in.cols())) * r;
    grad += weighted_residual_gradient(problem.pde, net, theta, x_in, w, opts);
  }
  if (x_bd.cols() > 0 && !net.has_ansatz() && lambda != 0.0) {
    const Vector bres = forward_batch(net, theta, x_bd) - target_values(problem, x_bd);
    const Vector w = (2.0 * lambda / static_cast<double>(x_bd.cols())) * bres;
    grad += weighted_param_gradient(net, theta, x_bd, w, opts);
  }
  return theta.with_values(theta.values - eta * grad);
}

void write_trace_csv(const FlowTrace& trace, std::ostream& os) {
  os << "epoch,lr,rel_l2,residual_rms,energy,wall_s\n";
  char buf[256];
  for (const FlowRecord& r : trace.records) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.lr, r.rel_l2, r.residual_rms,
                  r.energy, r.wall_s);
    os << buf;
  }
}

std::string trace_csv(const FlowTrace& trace) {
  std::ostringstream os;
  write_trace_csv(trace, os);
  return os.str();
}

namespace {

struct Samples {
  PointSet in, bd;
  Vector y;  // supervised targets
};

struct Measure {
  double rms = 0.0, energy = 0.0;
};

Measure measure(const ProblemDef& problem, const Network& net, const ParamVec& theta, const Samples& s,
                const AssemblyOptions& opts, bool& surrogate) {
  Measure m;
  if (problem.kind == ProblemKind::supervised) {
    const Vector r = s.y - forward_batch(net, theta, s.in);
    const double n = static_cast<double>(r.size());
    m.rms = std::sqrt(r.squaredNorm() / n);
    m.energy = r.squaredNorm() / (2.0 * n);
    surrogate = false;
    return m;
  }
  const ValueLaplacian vl = value_laplacian(net, theta, s.in, opts);
  double ss = 0.0, j2 = 0.0;
  for (Eigen::Index i = 0; i < s.in.cols(); ++i) {
    const Vector xi = s.in.col(i);
    const double u = vl.u(i), f = problem.pde.f(u, xi);
    const double r = vl.lap(i) + f;
    ss += r * r;
    j2 += 0.5 * (-vl.lap(i)) * u - f * u;
  }
  const double n = static_cast<double>(std::max<Eigen::Index>(s.in.cols(), 1));
  m.rms = std::sqrt(ss / n);
  surrogate = !problem.source_linear;
  if (surrogate) {
    m.energy = m.rms;
    return m;
  }
  double j3 = 0.0;
  if (s.bd.cols() > 0) {
    const Vector b = forward_batch(net, theta, s.bd) - target_values(problem, s.bd);
    j3 = b.squaredNorm() / (2.0 * static_cast<double>(s.bd.cols()));
  }
  m.energy = j2 / n + j3;
  return m;
}

}  // namespace

FlowTrace train(const ProblemDef& problem, const Network& net, const ParamVec& theta0, const TrainerConfig& cfg,
                std::uint64_t seed, int start_epoch, double rms_reference) {
  cfg.validate();
  net.check(theta0);
  if (start_epoch < 0 || start_epoch > cfg.epochs) throw std::invalid_argument("train: start epoch outside [0, K]");
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count(); };

  const int n_in = cfg.samples > 0 ? cfg.samples : problem.samples;
  const int n_bd = cfg.boundary_samples >= 0 ? cfg.boundary_samples : problem.boundary_samples;
  const int n_eval = cfg.eval_points > 0 ? cfg.eval_points : problem.eval_points;
  if (n_in < 1) throw std::invalid_argument("train: need at least one interior sample");
  const AssemblyOptions opts{cfg.threads};

  const PointSet eval = sample_interior(problem, n_eval, derive_seed(seed, "eval")).interior;
  const Vector eval_ref = steady_values(problem, eval);

  FlowTrace trace;
  trace.seed = seed;
  trace.config_hash = hash_tag(cfg.canonical());
  trace.theta = theta0;

  auto draw = [&](int epoch) {
    const std::uint64_t idx = cfg.resample == Resample::every_epoch ? static_cast<std::uint64_t>(epoch) : 0;
    Samples s;
    s.in = sample_interior(problem, n_in, derive_seed(seed, "interior", idx)).interior;
    s.bd = sample_boundary(problem, n_bd, derive_seed(seed, "boundary", idx)).boundary;
    if (problem.kind == ProblemKind::supervised) s.y = target_values(problem, s.in);
    return s;
  };

  auto gamma_at = [&](const Samples& s) {
    return [&problem, &net, &cfg, &opts, &s, &theta0](const Vector& v) {
      const ParamVec th = theta0.with_values(v);
      const ResidualSystem sys = problem.kind == ProblemKind::supervised
                                     ? assemble_supervised(net, th, s.in, s.y, opts)
                                     : assemble_pde(problem, net, th, s.in, s.bd, cfg.pde_form, opts);
      return ned_direction(sys, cfg.rel_tol).alpha;
    };
  };

  double rms0 = rms_reference;
  for (int n = start_epoch; n <= cfg.epochs; ++n) {
    const Samples s = draw(n);
    FlowRecord rec;
    rec.epoch = n;
    rec.lr = lr_schedule(n, cfg);
    bool surrogate = false;
    try {
      const Measure m = measure(problem, net, trace.theta, s, opts, surrogate);
      rec.residual_rms = m.rms;
      rec.energy = m.energy;
      rec.rel_l2 = relative_l2(forward_batch(net, trace.theta, eval), eval_ref);
    } catch (const std::exception& e) {
      trace.aborted = true;
      trace.abort_reason = std::string("evaluation failed at epoch ") + std::to_string(n) + ": " + e.what();
      break;
    }
    trace.energy_surrogate = surrogate;
    rec.wall_s = cfg.record_wall_time ? elapsed() : 0.0;
    if (n == start_epoch && rms_reference <= 0.0) rms0 = rec.residual_rms;
    trace.rms_reference = rms0;
    const bool finite = std::isfinite(rec.rel_l2) && std::isfinite(rec.residual_rms) && std::isfinite(rec.energy) &&
                        trace.theta.values.allFinite();
    if (!finite) {
      trace.aborted = true;
      trace.abort_reason = "non-finite state at epoch " + std::to_string(n);
      break;
    }
    trace.records.push_back(rec);
    if (rec.residual_rms > cfg.divergence_factor * rms0 && rms0 > 0.0) {
      trace.aborted = true;
      trace.abort_reason = "residual RMS exceeded the divergence factor at epoch " + std::to_string(n);
      break;
    }
    if (n == cfg.epochs || n == cfg.stop_epoch) break;
    if (cfg.time_budget_s > 0.0 && elapsed() > cfg.time_budget_s) {
      trace.aborted = true;
      trace.abort_reason = "time budget of " + std::to_string(cfg.time_budget_s) + " s exhausted at epoch " +
                           std::to_string(n);
      break;
    }

    const double eta = rec.lr;
    try {
      switch (cfg.method) {
        case Method::ned_fe: {
          const Vector g = gamma_at(s)(trace.theta.values);
          trace.theta = trace.theta.with_values(fe_step(trace.theta.values, g, eta));
          break;
        }
        case Method::ned_rk2:
          trace.theta = trace.theta.with_values(rk2_step(trace.theta.values, gamma_at(s), eta));
          break;
        case Method::sgd:
          trace.theta = problem.kind == ProblemKind::supervised
                            ? sgd_step_supervised(net, trace.theta, s.in, s.y, eta, opts)
                            : sgd_step_pde(problem, net, trace.theta, s.in, s.bd, eta, cfg.lambda, opts);
          break;
      }
    } catch (const std::exception& e) {
      trace.aborted = true;
      trace.abort_reason = std::string("step failed at epoch ") + std::to_string(n) + ": " + e.what();
      break;
    }
  }
  return trace;
}

FlowTrace train(const ProblemDef& problem, const TrainerConfig& cfg, std::uint64_t seed) {
  const Network net(problem.net);
  return train(problem, net, init_params(net, seed), cfg, seed);
}

TrainerConfig config_for(const ProblemDef& problem, Method method) {
  TrainerConfig cfg;
  cfg.method = method;
  cfg.tau0 = method == Method::sgd ? problem.tau0_sgd : problem.tau0_ned;
  cfg.epochs = problem.epochs;
  cfg.rel_tol = problem.rel_tol;
  return cfg;
}

}  // namespace ned
