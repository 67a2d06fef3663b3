#include "ned/problems.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "ned/rng.hpp"

namespace ned {

SampleSet sample_interior(const ProblemDef& problem, int n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("sample_interior: n must be >= 0");
  const int d = problem.dim();
  SampleSet s;
  s.seed = seed;
  s.interior.resize(d, n);
  s.boundary.resize(d, 0);
  Rng rng(seed);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < d; ++k) {
      double v;
      do v = rng.uniform(problem.lo(k), problem.hi(k));
      while (!(v > problem.lo(k) && v < problem.hi(k)));
      s.interior(k, j) = v;
    }
  }
  return s;
}

SampleSet sample_boundary(const ProblemDef& problem, int m, std::uint64_t seed) {
  if (m < 0) throw std::invalid_argument("sample_boundary: m must be >= 0");
  const int d = problem.dim();
  SampleSet s;
  s.seed = seed;
  s.interior.resize(d, 0);
  s.boundary.resize(d, m);
  const Vector side = problem.hi - problem.lo;
  // faces 2k (x_k = lo) and 2k+1 (x_k = hi) have measure prod_{i != k} side_i
  std::vector<double> cum(2 * d);
  double total = 0.0;
  for (int k = 0; k < d; ++k) {
    double meas = 1.0;
    for (int i = 0; i < d; ++i)
      if (i != k) meas *= side(i);
    total += meas;
    cum[2 * k] = total;
    total += meas;
    cum[2 * k + 1] = total;
  }
  Rng rng(seed);
  for (int j = 0; j < m; ++j) {
    const double r = rng.uniform() * total;
    int face = 0;
    while (face < 2 * d - 1 && r >= cum[face]) ++face;
    for (int k = 0; k < d; ++k) s.boundary(k, j) = rng.uniform(problem.lo(k), problem.hi(k));
    const int k = face / 2;
    s.boundary(k, j) = face % 2 == 0 ? problem.lo(k) : problem.hi(k);
  }
  return s;
}

Vector target_values(const ProblemDef& problem, const PointSet& x) {
  const ScalarField& g = problem.kind == ProblemKind::supervised ? problem.target : problem.boundary;
  if (!g) throw std::invalid_argument("problem '" + problem.name + "' has no target/boundary data");
  Vector y(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) y(j) = g(x.col(j));
  return y;
}

Vector steady_values(const ProblemDef& problem, const PointSet& x) {
  Vector y(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) y(j) = problem.u_s(x.col(j));
  return y;
}

double relative_l2(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw std::invalid_argument("relative_l2: length mismatch");
  const double den = v.squaredNorm();
  if (!(den > 0.0)) throw std::domain_error("relative_l2: reference has zero norm");
  return std::sqrt((u - v).squaredNorm() / den);
}

double relative_l2(const Network& net, const ParamVec& theta, const ProblemDef& problem, const PointSet& eval) {
  return relative_l2(forward_batch(net, theta, eval), steady_values(problem, eval));
}

double energy_j1(const Network& net, const ParamVec& theta, const PointSet& x, const Vector& y) {
  if (y.size() != x.cols()) throw std::invalid_argument("energy_j1: |X| != |y|");
  if (x.cols() == 0) return 0.0;
  return (forward_batch(net, theta, x) - y).squaredNorm() / (2.0 * static_cast<double>(x.cols()));
}

PdeEnergy energy_pde(const Network& net, const ParamVec& theta, const ProblemDef& problem, const PointSet& x_in,
                     const PointSet& x_bd, const AssemblyOptions& opts) {
  if (problem.kind != ProblemKind::pde_steady) throw std::invalid_argument("energy_pde: not a PDE problem");
  const ValueLaplacian vl = value_laplacian(net, theta, x_in, opts);
  const auto n = static_cast<double>(x_in.cols());
  PdeEnergy e;
  if (!problem.source_linear) {
    e.surrogate = true;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < x_in.cols(); ++i) {
      const double r = vl.lap(i) + problem.pde.f(vl.u(i), x_in.col(i));
      ss += r * r;
    }
    e.value = x_in.cols() > 0 ? std::sqrt(ss / n) : 0.0;
    return e;
  }
  double j2 = 0.0;
  for (Eigen::Index i = 0; i < x_in.cols(); ++i) {
    const double u = vl.u(i);
    j2 += 0.5 * (-vl.lap(i)) * u - problem.pde.f(u, x_in.col(i)) * u;
  }
  if (x_in.cols() > 0) j2 /= n;
  double j3 = 0.0;
  if (x_bd.cols() > 0) {
    const Vector r = forward_batch(net, theta, x_bd) - target_values(problem, x_bd);
    j3 = r.squaredNorm() / (2.0 * static_cast<double>(x_bd.cols()));
  }
  e.value = j2 + j3;
  return e;
}

SelfCheck self_check(const ProblemDef& problem, std::uint64_t seed) {
  SelfCheck out;
  const SampleSet in = sample_interior(problem, 100, derive_seed(seed, "self_check"));
  for (Eigen::Index j = 0; j < in.interior.cols(); ++j) {
    const Vector x = in.interior.col(j);
    double r;
    if (problem.kind == ProblemKind::supervised) {
      r = problem.target(x) - problem.u_s(x);
    } else {
      const double h = 1e-3;
      double lap = 0.0;
      const double u0 = problem.u_s(x);
      for (int k = 0; k < problem.dim(); ++k) {
        auto at = [&](double t) {
          Vector y = x;
          y(k) += t;
          return problem.u_s(y);
        };
        lap += (-at(2 * h) + 16.0 * at(h) - 30.0 * u0 + 16.0 * at(-h) - at(-2 * h)) / (12.0 * h * h);
      }
      r = lap + problem.pde.f(u0, x);
    }
    out.steady_residual = std::max(out.steady_residual, std::abs(r));
  }
  if (problem.kind == ProblemKind::pde_steady && problem.net.ansatz) {
    const SampleSet bd = sample_boundary(problem, 100, derive_seed(seed, "self_check_bd"));
    const AnsatzSpec& a = *problem.net.ansatz;
    for (Eigen::Index j = 0; j < bd.boundary.cols(); ++j) {
      const Vector x = bd.boundary.col(j);
      out.boundary_mismatch = std::max(out.boundary_mismatch, std::abs(a.lift(x).value - problem.boundary(x)));
      out.boundary_mismatch = std::max(out.boundary_mismatch, std::abs(a.distance(x).value));
    }
  }
  return out;
}

namespace {

// Singular values of the residual Jacobian below this fraction of the largest
// are dropped; the default cutoff lets the heat step blow up at epoch 1.
constexpr double kPdeRelTol = 1.0e-3;

ProblemDef sine(double length, Activation act, int epochs) {
  ProblemDef p;
  p.kind = ProblemKind::supervised;
  p.lo = Vector::Zero(1);
  p.hi = Vector::Constant(1, length);
  p.target = [](const Vector& x) { return std::sin(x(0)); };
  p.u_s = p.target;
  p.net = NetworkSpec::fnn(1, {50}, act);
  p.samples = 200;
  p.epochs = epochs;
  p.tau0_ned = 1.0e-3;
  p.tau0_sgd = 1.0e-3;
  return p;
}

ProblemDef normsq(int d) {
  ProblemDef p;
  p.kind = ProblemKind::supervised;
  p.lo = Vector::Constant(d, -1.0);
  p.hi = Vector::Constant(d, 1.0);
  p.target = [](const Vector& x) { return x.squaredNorm(); };
  p.u_s = p.target;
  p.net = NetworkSpec::fnn(d, {50}, Activation::relu);
  p.samples = 2000;
  p.epochs = 2500;
  p.tau0_ned = 3.0e-3;
  p.tau0_sgd = 1.0e-2;
  return p;
}

ProblemDef bvp_1d() {
  ProblemDef p;
  p.kind = ProblemKind::pde_steady;
  p.lo = Vector::Constant(1, -1.0);
  p.hi = Vector::Zero(1);
  p.pde.f = [](double u, const Vector&) { return -2.0 * u * u * u; };
  p.pde.df = [](double u, const Vector&) { return -6.0 * u * u; };
  p.u_s = [](const Vector& x) { return 1.0 / (x(0) + 3.0); };
  p.boundary = p.u_s;
  p.net = NetworkSpec::resnet(1, 2, 20, Activation::relu3);
  p.net.ansatz = interval_ansatz(-1.0, 0.0, 0.5, 1.0 / 3.0);
  p.samples = 10000;
  p.epochs = 3000;
  p.tau0_ned = 3.0e-4;
  p.tau0_sgd = 5.0e-3;
  p.rel_tol = kPdeRelTol;
  return p;
}

ProblemDef box_problem(int d, bool heat) {
  ProblemDef p;
  p.kind = ProblemKind::pde_steady;
  p.lo = Vector::Zero(d);
  p.hi = Vector::Ones(d);
  if (heat) {
    const double dd = d;
    p.pde.f = [dd](double, const Vector&) { return -dd; };
    p.pde.df = [](double, const Vector&) { return 0.0; };
    p.source_linear = true;
    p.u_s = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
    p.samples = 10000;
    p.tau0_ned = 8.0e-3;
    p.tau0_sgd = 1.0e-1;
  } else {
    p.pde.f = [](double u, const Vector&) { return u - u * u * u; };
    p.pde.df = [](double u, const Vector&) { return 1.0 - 3.0 * u * u; };
    p.u_s = [](const Vector&) { return 1.0; };
    p.samples = 20000;
    p.tau0_ned = 5.0e-7;
    p.tau0_sgd = 5.0e-1;
  }
  p.boundary = p.u_s;
  p.net = NetworkSpec::fnn(d, {20, 20, 20}, Activation::relu3);
  p.net.ansatz = unit_box_ansatz(d, heat ? BoxLift::half_norm_sq : BoxLift::one, true);
  p.epochs = 400;
  p.rel_tol = kPdeRelTol;
  return p;
}

const std::map<std::string, std::function<ProblemDef()>>& registry() {
  static const std::map<std::string, std::function<ProblemDef()>> r = {
      {"sin_2pi", [] { return sine(2.0 * std::numbers::pi, Activation::relu, 200); }},
      {"sin_10pi", [] { return sine(10.0 * std::numbers::pi, Activation::relu_plus_sin, 500); }},
      {"normsq_d2", [] { return normsq(2); }},
      {"normsq_d10", [] { return normsq(10); }},
      {"normsq_d30", [] { return normsq(30); }},
      {"bvp_1d", bvp_1d},
      {"heat_d5", [] { return box_problem(5, true); }},
      {"react_d5", [] { return box_problem(5, false); }},
  };
  return r;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, make] : registry()) {
    out.push_back(name);
    out.push_back(name + "_smoke");
  }
  return out;
}

ProblemDef preset(const std::string& name) {
  const std::string suffix = "_smoke";
  const bool smoke = name.size() > suffix.size() && name.ends_with(suffix);
  const std::string base = smoke ? name.substr(0, name.size() - suffix.size()) : name;
  const auto it = registry().find(base);
  if (it == registry().end()) throw std::invalid_argument("unknown preset '" + name + "'");
  ProblemDef p = it->second();
  p.name = name;
  if (smoke) {
    p.samples = std::max(1, p.samples / 4);
    p.boundary_samples /= 4;
    p.epochs = std::max(1, p.epochs / 4);
  }
  const SelfCheck sc = self_check(p);
  if (!(sc.steady_residual <= 1e-8) || !(sc.boundary_mismatch <= 1e-10))
    throw std::logic_error("preset '" + name + "' failed its registration self-check");
  return p;
}

ProblemDef constant_target_problem(double c, int samples, int dim) {
  ProblemDef p;
  p.name = "constant";
  p.kind = ProblemKind::supervised;
  p.lo = Vector::Zero(dim);
  p.hi = Vector::Ones(dim);
  p.target = [c](const Vector&) { return c; };
  p.u_s = p.target;
  p.net = NetworkSpec::constant(dim);
  p.samples = samples;
  p.epochs = 10;
  p.tau0_ned = 0.1;
  p.tau0_sgd = 0.1;
  return p;
}

}  // namespace ned
