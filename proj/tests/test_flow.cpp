#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "ned/flow.hpp"
#include "oracles.hpp"

using namespace ned;

namespace {

FlowTrace constant_run(Method m, Schedule sched, double eta, int epochs, double c, double theta0) {
  const ProblemDef p = constant_target_problem(c);
  const Network net(p.net);
  ParamVec th = net.zeros();
  th.values(0) = theta0;
  TrainerConfig cfg = config_for(p, m);
  cfg.schedule = sched;
  cfg.tau0 = eta;
  cfg.epochs = epochs;
  cfg.eval_points = 8;
  return train(p, net, th, cfg, 1);
}

}  // namespace

TEST_CASE("cosine schedule") {
  TrainerConfig cfg;
  cfg.tau0 = 0.2;
  cfg.q = 0.5;
  cfg.epochs = 10;
  for (int n = 0; n <= 10; ++n)
    CHECK(lr_schedule(n, cfg) == doctest::Approx(0.1 * (std::cos(std::numbers::pi * n / 10.0) + 1.0)));
  CHECK(lr_schedule(0, cfg) == doctest::Approx(0.2));
  cfg.schedule = Schedule::constant;
  CHECK(lr_schedule(7, cfg) == 0.2);
  cfg.epochs = 0;
  cfg.schedule = Schedule::cosine;
  CHECK(std::isfinite(lr_schedule(0, cfg)));
}

TEST_CASE("steppers on the constant model follow their amplification factors") {
  const double c = 1.5, t0 = -0.5, eta = 0.2;
  const int k = 12;
  const double fe = c + std::pow(1.0 - eta, k) * (t0 - c);
  const double rk2 = c + std::pow(1.0 - eta + 0.5 * eta * eta, k) * (t0 - c);
  const double sgd = c + std::pow(1.0 - 2.0 * eta, k) * (t0 - c);
  CHECK(constant_run(Method::ned_fe, Schedule::constant, eta, k, c, t0).theta.values(0) == doctest::Approx(fe).epsilon(1e-13));
  CHECK(constant_run(Method::ned_rk2, Schedule::constant, eta, k, c, t0).theta.values(0) == doctest::Approx(rk2).epsilon(1e-13));
  CHECK(constant_run(Method::sgd, Schedule::constant, eta, k, c, t0).theta.values(0) == doctest::Approx(sgd).epsilon(1e-13));
}

TEST_CASE("cosine-scheduled FE multiplies the per-epoch factors") {
  const double c = 0.3, t0 = 2.0, tau = 0.1;
  const int k = 9;
  TrainerConfig cfg;
  cfg.tau0 = tau;
  cfg.epochs = k;
  double gap = t0 - c;
  for (int n = 0; n < k; ++n) gap *= 1.0 - lr_schedule(n, cfg);
  const FlowTrace t = constant_run(Method::ned_fe, Schedule::cosine, tau, k, c, t0);
  CHECK(t.theta.values(0) == doctest::Approx(c + gap).epsilon(1e-13));
  REQUIRE(t.records.size() == k + 1);
  CHECK(t.records.front().lr == doctest::Approx(tau));
  CHECK(t.records.back().energy == doctest::Approx(0.5 * gap * gap).epsilon(1e-10));
}

TEST_CASE("rk2_step is the midpoint rule") {
  const auto gamma = [](const Vector& th) { return Vector(-th.array().square()); };
  Vector th(2);
  th << 1.0, -2.0;
  const Vector out = rk2_step(th, gamma, 0.1);
  for (int i = 0; i < 2; ++i) {
    const double k1 = -th(i) * th(i) * 0.1;
    const double mid = th(i) + 0.5 * k1;
    CHECK(out(i) == doctest::Approx(th(i) - 0.1 * mid * mid));
  }
  CHECK(fe_step(th, Vector::Ones(2), 0.5) == th + Vector::Constant(2, 0.5));
}

TEST_CASE("supervised NED direction solves the linearized misfit") {
  const Network net(NetworkSpec::fnn(1, {3}, Activation::relu3));
  const ParamVec th = init_params(net, 2);
  PointSet x(1, 4);
  x << 0.1, 0.4, 0.7, 0.9;
  Vector y(4);
  y << 1.0, 0.0, -1.0, 0.5;
  const ResidualSystem sys = assemble_supervised(net, th, x, y);
  CHECK(sys.a.rows() == 4);
  CHECK(sys.b.isApprox(y - forward_batch(net, th, x)));
  const Direction d = ned_direction(sys);
  // wide full-row-rank system: the step reproduces the misfit exactly
  CHECK((sys.a * d.alpha - sys.b).norm() <= 1e-10);
}

TEST_CASE("PDE assembly: residual rows by default, boundary rows vanish under the ansatz") {
  const ProblemDef p = preset("bvp_1d_smoke");
  const Network net(p.net);
  const ParamVec th = init_params(net, 3);
  PointSet xin(1, 3), xbd(1, 2);
  xin << -0.8, -0.5, -0.1;
  xbd << -1.0, 0.0;
  const ResidualSystem sys = assemble_pde(p, net, th, xin, xbd);
  CHECK(sys.interior_rows() == 3);
  CHECK(sys.a.rows() == 5);
  CHECK(sys.b.head(3).isApprox(-pde_residual(p.pde, net, th, xin).r));
  CHECK(sys.a.bottomRows(2).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK_FALSE(sys.warnings.empty());
  const ResidualSystem evo = assemble_pde(p, net, th, xin, PointSet(1, 0), PdeForm::evolution);
  CHECK(evo.a.isApprox(param_jacobian(net, th, xin).a));
  CHECK(evo.b.isApprox(pde_residual(p.pde, net, th, xin).r));
}

TEST_CASE("SGD PDE step is the gradient of the mean squared residual") {
  const ProblemDef p = preset("bvp_1d_smoke");
  const Network net(p.net);
  const ParamVec th = init_params(net, 5);
  PointSet x(1, 4);
  x << -0.9, -0.6, -0.3, -0.05;
  const auto [jac, res] = pde_residual_jacobian(p.pde, net, th, x);
  const Vector grad = 2.0 / 4.0 * jac.a.transpose() * res.r;
  const ParamVec next = sgd_step_pde(p, net, th, x, PointSet(1, 0), 0.01, 1.0);
  CHECK((next.values - (th.values - 0.01 * grad)).norm() <= 1e-12 * (1.0 + th.values.norm()));
}

TEST_CASE("a stopped run resumes to the uninterrupted trace") {
  const ProblemDef p = preset("sin_2pi_smoke");
  const Network net(p.net);
  const ParamVec th0 = init_params(net, 4);
  TrainerConfig cfg = config_for(p, Method::ned_rk2);
  cfg.epochs = 6;
  const FlowTrace full = train(p, net, th0, cfg, 4);
  TrainerConfig head = cfg;
  head.stop_epoch = 3;
  const FlowTrace first = train(p, net, th0, head, 4);
  REQUIRE(first.records.size() == 4);
  const FlowTrace rest = train(p, net, first.theta, cfg, 4, 3, first.rms_reference);
  std::ostringstream a, b;
  FlowTrace joined = first;
  joined.records.insert(joined.records.end(), rest.records.begin() + 1, rest.records.end());
  write_trace_csv(full, a);
  write_trace_csv(joined, b);
  CHECK(a.str() == b.str());
  CHECK(rest.theta.values == full.theta.values);
}

TEST_CASE("traces do not depend on the assembly thread count") {
  const ProblemDef p = preset("heat_d5_smoke");
  TrainerConfig cfg = config_for(p, Method::ned_fe);
  cfg.epochs = 2;
  cfg.samples = 150;
  cfg.eval_points = 200;
  const std::string one = trace_csv(train(p, cfg, 6));
  cfg.threads = 4;
  CHECK(trace_csv(train(p, cfg, 6)) == one);
  cfg.method = Method::sgd;
  cfg.threads = 1;
  const std::string sgd1 = trace_csv(train(p, cfg, 6));
  cfg.threads = 3;
  CHECK(trace_csv(train(p, cfg, 6)) == sgd1);
}

TEST_CASE("trace CSV layout") {
  const FlowTrace t = constant_run(Method::ned_fe, Schedule::constant, 0.5, 2, 1.0, 0.0);
  const std::string csv = trace_csv(t);
  CHECK(csv.rfind("epoch,lr,rel_l2,residual_rms,energy,wall_s\n", 0) == 0);
  CHECK(csv.find("\n2,0.5,") != std::string::npos);
  CHECK(csv.back() == '\n');
}

TEST_CASE("diverging runs stop with a reason") {
  // eta = 3 on the constant model doubles the misfit every epoch
  const FlowTrace t = constant_run(Method::ned_fe, Schedule::constant, 3.0, 60, 1.0, 0.0);
  CHECK(t.aborted);
  CHECK(t.abort_reason.find("divergence") != std::string::npos);
  CHECK(t.records.size() < 61);
}

TEST_CASE("config validation") {
  TrainerConfig cfg;
  cfg.tau0 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainerConfig{};
  cfg.q = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainerConfig{};
  cfg.epochs = 3;
  cfg.stop_epoch = 4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK(method_from_string("ned_rk2") == Method::ned_rk2);
  CHECK_THROWS(method_from_string("adam"));
  TrainerConfig a, b;
  b.threads = 8;
  b.record_wall_time = true;
  CHECK(a.canonical() == b.canonical());
  b.tau0 = 2e-3;
  CHECK(a.canonical() != b.canonical());
}
