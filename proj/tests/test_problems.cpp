#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ned/problems.hpp"
#include "oracles.hpp"

using namespace ned;

TEST_CASE("every preset's steady state satisfies its own equation") {
  for (const std::string& name : preset_names()) {
    CAPTURE(name);
    const ProblemDef p = preset(name);
    const SelfCheck c = self_check(p);
    CHECK(c.steady_residual <= 1e-8);
    CHECK(c.boundary_mismatch <= 1e-10);
  }
}

TEST_CASE("smoke variants quarter samples and epochs") {
  const ProblemDef full = preset("heat_d5"), smoke = preset("heat_d5_smoke");
  CHECK(smoke.samples == full.samples / 4);
  CHECK(smoke.epochs == full.epochs / 4);
  CHECK(smoke.tau0_ned == full.tau0_ned);
  CHECK_THROWS_AS(preset("nope"), std::invalid_argument);
}

TEST_CASE("bvp steady state is 1/(x+3)") {
  const ProblemDef p = preset("bvp_1d");
  for (double x : {-1.0, -0.5, 0.0}) CHECK(p.u_s(Vector::Constant(1, x)) == doctest::Approx(1.0 / (x + 3.0)));
  // u'' = 2/(x+3)^3 = 2 u^3, so R = u'' - 2u^3 vanishes
  const double u = 0.4;
  CHECK(p.pde.f(u, Vector::Zero(1)) == doctest::Approx(-2.0 * u * u * u));
}

TEST_CASE("interior samples are inside the box and reproducible") {
  const ProblemDef p = preset("normsq_d10");
  const SampleSet a = sample_interior(p, 500, 3), b = sample_interior(p, 500, 3);
  CHECK(a.interior == b.interior);
  CHECK(a.interior.rows() == 10);
  CHECK(a.interior.minCoeff() > -1.0);
  CHECK(a.interior.maxCoeff() < 1.0);
  // mean of U(-1, 1) is 0 with standard error 1/sqrt(3 * 5000)
  CHECK(std::abs(a.interior.mean()) < 0.05);
}

TEST_CASE("boundary samples lie on faces in proportion to face area") {
  ProblemDef p = preset("heat_d5");
  p.lo = Vector::Zero(2);
  p.hi = Vector(2);
  p.hi << 3.0, 1.0;  // faces x_0 = const have length 1, faces x_1 = const length 3
  const SampleSet s = sample_boundary(p, 8000, 17);
  int on_x0 = 0;
  for (Eigen::Index j = 0; j < s.boundary.cols(); ++j) {
    const double x = s.boundary(0, j), y = s.boundary(1, j);
    const bool f0 = x == 0.0 || x == 3.0, f1 = y == 0.0 || y == 1.0;
    CHECK((f0 || f1));
    on_x0 += f0;
  }
  CHECK(std::abs(on_x0 / 8000.0 - 0.25) < 0.02);
}

TEST_CASE("relative_l2 against a direct sum") {
  Vector u(3), v(3);
  u << 1.0, 2.0, 2.0;
  v << 1.0, 0.0, 2.0;
  CHECK(relative_l2(u, v) == doctest::Approx(std::sqrt(4.0 / 5.0)));
  CHECK_THROWS_AS(relative_l2(u, Vector::Zero(3)), std::domain_error);
}

TEST_CASE("J1 is half the mean squared misfit") {
  const ProblemDef p = constant_target_problem(2.0, 4);
  const Network net(p.net);
  ParamVec th = net.zeros();
  th.values(0) = 0.5;
  const SampleSet s = sample_interior(p, 4, 1);
  const Vector y = target_values(p, s.interior);
  CHECK(energy_j1(net, th, s.interior, y) == doctest::Approx(0.5 * 1.5 * 1.5));
}

TEST_CASE("heat energy at the steady state") {
  // J2 at u_s = |x|^2/2 with -Lap u = -d and f = -d: (1/N) sum (-d u / 2 + d u) = (d/2) mean(u)
  const ProblemDef p = preset("heat_d5_smoke");
  Network net(p.net);
  ParamVec th = init_params(net, 1);
  th.values.setZero();  // U = lift; the sine bump keeps it away from u_s
  const SampleSet s = sample_interior(p, 50, 2);
  const PdeEnergy e = energy_pde(net, th, p, s.interior, PointSet(5, 0));
  CHECK_FALSE(e.surrogate);
  double ref = 0.0;
  for (Eigen::Index j = 0; j < 50; ++j) {
    const Vector x = s.interior.col(j);
    double prod = 1.0, lap_bump = 0.0;
    for (int k = 0; k < 5; ++k) prod *= x(k) * (1 - x(k));
    const double sum = x.sum();
    // lift = |x|^2/2 + sin(2 pi sum) prod; Laplacian by product rule
    const double w = 2.0 * std::numbers::pi;
    for (int k = 0; k < 5; ++k) {
      const double q = x(k) * (1 - x(k)), dq = 1 - 2 * x(k), rest = prod / q;
      lap_bump += rest * (-w * w * std::sin(w * sum) * q + 2 * w * std::cos(w * sum) * dq - 2 * std::sin(w * sum));
    }
    const double u = 0.5 * x.squaredNorm() + std::sin(w * sum) * prod;
    const double lap = 5.0 + lap_bump;
    ref += 0.5 * (-lap) * u + 5.0 * u;
  }
  CHECK(e.value == doctest::Approx(ref / 50.0).epsilon(1e-12));
}

TEST_CASE("reaction energy falls back to the residual RMS") {
  const ProblemDef p = preset("react_d5_smoke");
  const Network net(p.net);
  const SampleSet s = sample_interior(p, 20, 4);
  const PdeEnergy e = energy_pde(net, init_params(net, 2), p, s.interior, PointSet(5, 0));
  CHECK(e.surrogate);
  CHECK(e.value > 0.0);
}
