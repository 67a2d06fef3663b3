#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ned/constructions.hpp"
#include "ned/harness.hpp"
#include "ned/io.hpp"
#include "ned/rng.hpp"

namespace ned {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

bool smooth_net(const NetworkSpec& s) {
  for (Activation a : s.activations)
    if (a == Activation::relu || a == Activation::relu_plus_sin) return false;
  if (s.arch == Architecture::resnet &&
      (s.block_activation == Activation::relu || s.block_activation == Activation::relu_plus_sin))
    return false;
  return true;
}

// FD checks one (theta, x) draw at a time until `draws` of them were scored;
// draws landing on a kink are replaced.
SuiteCheck fd_draws(FdOp op, const ProblemDef& p, const Network& net, int draws, double step, std::uint64_t seed) {
  constexpr double kTol = 1e-5;
  const Timer timer;
  double worst = 0.0;
  int scored = 0, attempts = 0;
  while (scored < draws && attempts < 20 * draws) {
    const std::uint64_t s = derive_seed(seed, "fd", static_cast<std::uint64_t>(attempts++));
    const ParamVec theta = init_params(net, s);
    const PointSet x = sample_interior(p, 1, derive_seed(s, "x")).interior;
    const FdReport r = fd_validate(op, net, theta, x, step, kTol, op == FdOp::pde_residual_jacobian ? &p.pde : nullptr);
    if (r.checked == 0) continue;
    worst = std::max(worst, r.max_rel);
    ++scored;
  }
  SuiteCheck c;
  c.name = p.name + " " + to_string(op);
  c.passed = scored == draws && worst <= kTol;
  c.detail = std::to_string(scored) + " draws, max rel " + fmt("%.3g", worst) + ", " + fmt("%.1f", timer.seconds()) + " s";
  return c;
}

double constant_flow_error(Method m, double eta, double c, double theta0) {
  const ProblemDef p = constant_target_problem(c);
  const Network net(p.net);
  ParamVec th = init_params(net, 0);
  th.values.setConstant(theta0);
  TrainerConfig cfg = config_for(p, m);
  cfg.schedule = Schedule::constant;
  cfg.tau0 = eta;
  cfg.epochs = static_cast<int>(std::lround(1.0 / eta));
  cfg.eval_points = 16;
  const FlowTrace t = train(p, net, th, cfg, 7);
  const double exact = c + std::exp(-1.0) * (theta0 - c);
  return std::abs(t.theta.values(0) - exact);
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const SuiteCheck& c) { return c.passed; });
}

std::string SuiteReport::text() const {
  std::ostringstream os;
  for (const SuiteCheck& c : checks) os << (c.passed ? "ok   " : "FAIL ") << c.name << ": " << c.detail << "\n";
  for (const std::string& n : notes) os << "note " << n << "\n";
  os << suite << ": " << (passed() ? "passed" : "FAILED") << " (" << fmt("%.1f", seconds) << " s)\n";
  return os.str();
}

SuiteReport check_derivatives(int draws) {
  const Timer timer;
  SuiteReport rep;
  rep.suite = "deriv";
  std::set<std::string> seen;
  for (const std::string& name : preset_names()) {
    if (name.ends_with("_smoke")) continue;
    const ProblemDef p = preset(name);
    // presets sharing a network are checked once; residual Jacobians depend on f and are checked per preset
    const bool fresh = seen.insert(spec_to_json(p.net).dump()).second;
    const Network net(p.net);
    const std::uint64_t seed = derive_seed(11, name);
    if (fresh) rep.checks.push_back(fd_draws(FdOp::param_jacobian, p, net, draws, 1e-5, seed));
    if (!smooth_net(p.net)) {
      if (fresh)
        rep.notes.push_back(p.name + ": Laplacian not defined for this activation, only the parameter Jacobian is checked");
      continue;
    }
    if (fresh) rep.checks.push_back(fd_draws(FdOp::laplacian, p, net, draws, 1e-4, seed));
    if (p.kind == ProblemKind::pde_steady)
      rep.checks.push_back(fd_draws(FdOp::pde_residual_jacobian, p, net, draws, 1e-6, seed));
  }
  rep.seconds = timer.seconds();
  return rep;
}

SuiteReport check_integrator_orders() {
  const Timer timer;
  SuiteReport rep;
  rep.suite = "integrators";
  const double c = 0.75, theta0 = -0.5;
  const double etas[] = {0.1, 0.05, 0.025};
  for (Method m : {Method::ned_fe, Method::ned_rk2}) {
    const double lo = m == Method::ned_fe ? 1.8 : 3.6;
    const double hi = m == Method::ned_fe ? 2.2 : 4.4;
    double err[3];
    for (int i = 0; i < 3; ++i) err[i] = constant_flow_error(m, etas[i], c, theta0);
    for (int i = 0; i < 2; ++i) {
      const double ratio = err[i] / err[i + 1];
      SuiteCheck chk;
      chk.name = to_string(m) + " ratio eta " + fmt("%g", etas[i]) + "/" + fmt("%g", etas[i + 1]);
      chk.passed = ratio >= lo && ratio <= hi;
      chk.detail = fmt("%.4f", ratio) + " in [" + fmt("%g", lo) + ", " + fmt("%g", hi) + "], errors " +
                   fmt("%.3e", err[i]) + " " + fmt("%.3e", err[i + 1]);
      rep.checks.push_back(chk);
    }
  }
  rep.seconds = timer.seconds();
  return rep;
}

SuiteReport check_energy_monotonicity() {
  const Timer timer;
  SuiteReport rep;
  rep.suite = "energy";
  struct Case {
    double c, theta0;
  };
  for (Method m : {Method::ned_fe, Method::ned_rk2})
    for (double eta : {0.1, 0.5, 1.0})
      for (Case cs : {Case{0.75, -0.5}, Case{-2.0, 3.0}}) {
        const ProblemDef p = constant_target_problem(cs.c);
        const Network net(p.net);
        ParamVec th = init_params(net, 0);
        th.values.setConstant(cs.theta0);
        TrainerConfig cfg = config_for(p, m);
        cfg.schedule = Schedule::constant;
        cfg.tau0 = eta;
        cfg.epochs = 40;
        cfg.eval_points = 16;
        const FlowTrace t = train(p, net, th, cfg, 3);
        bool ok = true;
        int bad = -1;
        for (std::size_t n = 1; n < t.records.size() && ok; ++n) {
          const double prev = t.records[n - 1].energy, cur = t.records[n].energy;
          ok = prev > 1e-12 ? cur < prev : cur <= prev;
          if (!ok) bad = t.records[n].epoch;
        }
        SuiteCheck chk;
        chk.name = to_string(m) + " eta " + fmt("%g", eta) + " c " + fmt("%g", cs.c);
        chk.passed = ok;
        chk.detail = ok ? "J1 " + fmt("%.3e", t.records.front().energy) + " -> " + fmt("%.3e", t.records.back().energy)
                        : "J1 increased at epoch " + std::to_string(bad);
        rep.checks.push_back(chk);
      }
  rep.seconds = timer.seconds();
  return rep;
}

SuiteReport check_pinv() {
  const Timer timer;
  SuiteReport rep;
  rep.suite = "linalg";
  Rng rng(derive_seed(5, "pinv"));
  auto orthonormal = [&](Eigen::Index n) {
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.uniform(-1, 1);
    return Eigen::MatrixXd(Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ());
  };
  struct Shape {
    Eigen::Index m, n, r;
  };
  double worst_recon = 0.0, worst_null = 0.0, worst_ne = 0.0;
  for (Shape s : {Shape{40, 12, 12}, Shape{40, 12, 7}, Shape{12, 40, 12}, Shape{12, 40, 5}, Shape{30, 30, 30},
                  Shape{30, 30, 18}, Shape{200, 60, 60}, Shape{60, 200, 33}}) {
    // A = U diag(sv) V^T with known null space V(:, r:)
    const Eigen::MatrixXd u = orthonormal(s.m), v = orthonormal(s.n);
    Vector sv(s.r);
    for (Eigen::Index i = 0; i < s.r; ++i) sv(i) = std::pow(10.0, -3.0 * static_cast<double>(i) / std::max<Eigen::Index>(1, s.r - 1));
    const Eigen::MatrixXd a = u.leftCols(s.r) * sv.asDiagonal() * v.leftCols(s.r).transpose();
    Vector b(s.m);
    for (Eigen::Index i = 0; i < s.m; ++i) b(i) = rng.uniform(-1, 1);

    const Eigen::MatrixXd ap = pinv(a, 1e-10);
    const double recon = (a * ap * a - a).cwiseAbs().maxCoeff() / sv(0);
    worst_recon = std::max(worst_recon, recon);

    const PinvResult x = pinv_solve(a, b, 1e-10);
    if (s.r < s.n) {
      const double leak = (v.rightCols(s.n - s.r).transpose() * x.x).norm() / std::max(x.x.norm(), 1e-300);
      worst_null = std::max(worst_null, leak);
    }
    if (s.r == s.n && s.m >= s.n) {
      using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
      using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
      const LMat al = a.cast<long double>();
      const LVec xn = (al.transpose() * al).ldlt().solve(al.transpose() * b.cast<long double>());
      const double diff = static_cast<double>((x.x.cast<long double>() - xn).norm() / xn.norm());
      worst_ne = std::max(worst_ne, diff);
    }
  }
  rep.checks.push_back({"A A+ A = A", worst_recon <= 1e-8, "max entry error / sigma_max " + fmt("%.3g", worst_recon)});
  rep.checks.push_back({"minimum norm", worst_null <= 1e-10, "null-space component " + fmt("%.3g", worst_null)});
  rep.checks.push_back({"normal equations", worst_ne <= 1e-9, "relative difference " + fmt("%.3g", worst_ne)});

  // exact zero rows and columns (dead units) are compressed out, not solved
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(6, 5);
  z(0, 0) = 2.0;
  z(2, 3) = -1.0;
  z(4, 0) = 1.0;
  Vector bz = Vector::LinSpaced(6, 1.0, 6.0);
  const PinvResult xz = pinv_solve(z, bz);
  Vector expect = Vector::Zero(5);
  expect(0) = (2.0 * 1.0 + 1.0 * 5.0) / 5.0;
  expect(3) = -3.0;
  const double dz = (xz.x - expect).norm();
  rep.checks.push_back({"zero rows and columns", dz <= 1e-14 && xz.rank == 2, "error " + fmt("%.3g", dz)});

  const PinvResult x0 = pinv_solve(Eigen::MatrixXd::Zero(4, 3), Vector::Ones(4));
  rep.checks.push_back({"rank zero", x0.rank_zero && x0.x.isZero(0.0), "x == 0 flagged"});
  rep.seconds = timer.seconds();
  return rep;
}

SuiteReport check_constructions() {
  const Timer timer;
  SuiteReport rep;
  rep.suite = "constructions";
  Rng rng(derive_seed(9, "gadgets"));
  auto random_points = [&](int d, int n, double lo, double hi) {
    PointSet x(d, n);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(lo, hi);
    return x;
  };
  auto add = [&](const GadgetReport& r) {
    SuiteCheck c;
    c.name = r.name + " " + r.params;
    c.passed = r.passed();
    c.detail = "width " + std::to_string(r.width) + "/" + std::to_string(r.width_budget) + ", depth " +
               std::to_string(r.depth) + "/" + std::to_string(r.depth_budget) + ", error " +
               fmt("%.3g", r.measured) + " <= " + fmt("%.3g", r.tolerance) + " over " + std::to_string(r.points) +
               " points";
    rep.checks.push_back(c);
  };
  auto dbl = [](std::initializer_list<int> v) { return std::vector<double>(v.begin(), v.end()); };

  for (int n = 1; n <= 3; ++n)
    for (int l = 1; l <= 3; ++l) {
      add(verify_by_name("sigma1_square", dbl({n, l})));
      add(verify_by_name("sigma1_product", {double(n), double(l), -1.0, 2.0}));
    }
  {
    // on the diagonal the product gadget is held to the same bound
    const GadgetNet g = sigma1_product(2, 2, 0.0, 1.0);
    PointSet diag(2, 10001);
    diag.row(0) = Eigen::RowVectorXd::LinSpaced(10001, 0.0, 1.0);
    diag.row(1) = diag.row(0);
    GadgetReport r = verify_gadget(g, [](const Vector& x) { return x(0) * x(0); }, diag);
    r.params += " diagonal";
    add(r);
  }
  for (int n = 2; n <= 6; ++n) add(verify_by_name("sigma1_min", dbl({n})));
  for (int d = 1; d <= 5; ++d) add(verify_by_name("spike", dbl({d})));
  for (int d = 1; d <= 3; ++d) {
    add(verify_by_name("sigma1_identity", dbl({d}), 10000));
    add(verify_by_name("sigma2_identity", dbl({d}), 10000));
  }
  add(verify_by_name("sigma2_square", {}));
  add(verify_by_name("sigma2_product", {}));
  for (const std::vector<double>& mono : {dbl({1, 2, 3}), dbl({1, 2, 2, 1}), dbl({2, 4, 5, 0, 2}), dbl({3, 3, 4, 4}),
                                          dbl({2, 2, 1, 1, 1, 1}), dbl({2, 4, 7}), dbl({1, 1, 0, 0})})
    add(verify_by_name("sigma2_monomial", mono));
  const std::vector<PolyTerm> terms{{1.5, {2, 1, 0}}, {-2.0, {0, 3, 1}}, {0.5, {1, 0, 0}},
                                    {3.0, {0, 0, 0}}, {1.0, {1, 1, 2}}, {-0.75, {0, 0, 4}}};
  add(verify_gadget(sigma2_polynomial(terms, 2, 16, 3, 2), [&](const Vector& x) { return polynomial_value(terms, x); },
                    random_points(3, 100000, -1.5, 1.5)));

  for (int d = 1; d <= 3; ++d)
    for (int k : {2, 4}) {
      const auto idx = pu_indices(d, k);
      const PointSet x = random_points(d, 1000, 0.0, 1.0);
      const PointSet wide = random_points(d, 1000, -0.5, 1.5);
      for (PuForm form : {PuForm::factors, PuForm::single_net}) {
        const auto nets = partition_of_unity(d, k, form);
        double sum_err = 0.0, err = 0.0, range_err = 0.0, support_err = 0.0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          double s = 0.0;
          for (std::size_t i = 0; i < nets.size(); ++i) s += evaluate(nets[i], x.col(j));
          sum_err = std::max(sum_err, std::abs(s - 1.0));
        }
        for (std::size_t i = 0; i < nets.size(); ++i) {
          Vector centre(d);
          for (int l = 0; l < d; ++l) centre(l) = static_cast<double>(idx[i][static_cast<std::size_t>(l)]) / k;
          for (Eigen::Index j = 0; j < wide.cols(); ++j) {
            const Vector p = wide.col(j);
            const double v = evaluate(nets[i], p);
            err = std::max(err, std::abs(v - pu_value(idx[i], k, p)));
            range_err = std::max({range_err, -v, v - 1.0});
            if ((p - centre).cwiseAbs().maxCoeff() > 1.0 / k) support_err = std::max(support_err, std::abs(v));
          }
        }
        int width = 0, depth = 0;
        bool budget_ok = true;
        for (const GadgetNet& g : nets) {
          width = std::max(width, g.width());
          depth = std::max(depth, g.depth());
          budget_ok = budget_ok && g.within_budget();
        }
        const GadgetNet& g = nets.front();
        SuiteCheck c;
        c.name = std::string(form == PuForm::factors ? "pu" : "pu_single") + " d=" + std::to_string(d) +
                 " K=" + std::to_string(k);
        c.passed = budget_ok && err <= 1e-12 && sum_err <= 1e-12 && range_err <= 1e-12 && support_err <= 1e-12;
        c.detail = std::to_string(nets.size()) + " functions, width " + std::to_string(width) + "/" +
                   std::to_string(g.width_budget) + ", depth " + std::to_string(depth) + "/" +
                   std::to_string(g.depth_budget) + " (" + g.budget_rule + "), error " + fmt("%.3g", err) +
                   ", |sum - 1| " + fmt("%.3g", sum_err) + ", outside [0,1] " + fmt("%.3g", range_err) +
                   ", outside support " + fmt("%.3g", support_err);
        rep.checks.push_back(c);
        if (!budget_ok)
          rep.notes.push_back(c.name + ": each factor psi has four kinks, so the first hidden layer needs 4 neurons "
                              "per coordinate before any product is formed; the printed width max{4,2d} is not "
                              "reached by this construction");
      }
    }
  rep.seconds = timer.seconds();
  return rep;
}

SuiteReport validate_suite(const std::string& suite) {
  if (suite == "deriv") return check_derivatives();
  if (suite == "linalg") return check_pinv();
  if (suite == "constructions") return check_constructions();
  if (suite == "integrators") {
    SuiteReport r = check_integrator_orders();
    const SuiteReport e = check_energy_monotonicity();
    r.checks.insert(r.checks.end(), e.checks.begin(), e.checks.end());
    r.seconds += e.seconds;
    return r;
  }
  throw std::invalid_argument("unknown suite '" + suite + "' (deriv, linalg, constructions, integrators)");
}

std::vector<std::string> suite_names() { return {"deriv", "linalg", "constructions", "integrators"}; }

}  // namespace ned
