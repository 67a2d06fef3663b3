#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ned/deriv.hpp"
#include "ned/net.hpp"

namespace ned {

enum class ProblemKind { supervised, pde_steady };

using ScalarField = std::function<double(const Vector&)>;

/// A learning problem on the box [lo, hi] together with the hyperparameters
/// of its experiment. For PDE problems the residual is
/// R = Laplacian(u) + f(u, x) with Dirichlet data h on the boundary.
struct ProblemDef {
  std::string name;
  ProblemKind kind = ProblemKind::supervised;
  Vector lo, hi;

  ScalarField target;        ///< supervised: y = target(x)
  PdeTerms pde;              ///< pde_steady
  ScalarField boundary;      ///< pde_steady: h
  bool source_linear = false;  ///< f independent of u (energy J2 + J3 applies)
  ScalarField u_s;           ///< steady state / target

  NetworkSpec net;
  int samples = 0;           ///< interior samples per epoch
  int boundary_samples = 0;  ///< 0 when the ansatz enforces the boundary data
  int epochs = 0;
  double tau0_ned = 0.0;
  double tau0_sgd = 0.0;
  double rel_tol = 0.0;      ///< pinv cutoff for NED runs; 0 selects the solver default
  int eval_points = 10000;

  int dim() const { return static_cast<int>(lo.size()); }
};

struct SampleSet {
  PointSet interior;
  PointSet boundary;
  std::uint64_t seed = 0;
};

/// n i.i.d. uniform points strictly inside the box.
SampleSet sample_interior(const ProblemDef& problem, int n, std::uint64_t seed);

/// m points uniform on the box faces, each face chosen with probability
/// proportional to its (d-1)-measure.
SampleSet sample_boundary(const ProblemDef& problem, int m, std::uint64_t seed);

/// target(x) (supervised) or h(x) (pde) at every column.
Vector target_values(const ProblemDef& problem, const PointSet& x);
Vector steady_values(const ProblemDef& problem, const PointSet& x);

/// (sum |U - u_s|^2 / sum |u_s|^2)^(1/2) over the evaluation points.
double relative_l2(const Network& net, const ParamVec& theta, const ProblemDef& problem, const PointSet& eval);

/// sum |u - v|^2 / sum |v|^2, square-rooted; throws on a zero denominator.
double relative_l2(const Vector& u, const Vector& v);

/// (1 / 2N) sum (U(x_i) - y_i)^2.
double energy_j1(const Network& net, const ParamVec& theta, const PointSet& x, const Vector& y);

struct PdeEnergy {
  double value = 0.0;
  bool surrogate = false;  ///< true: interior residual RMS, not J2 + J3
};

/// (1/N) sum [ (-Laplacian U) U / 2 - f U ] + (1 / 2M) sum (U - h)^2 when
/// the source does not depend on u; otherwise the interior residual RMS.
PdeEnergy energy_pde(const Network& net, const ParamVec& theta, const ProblemDef& problem, const PointSet& x_in,
                     const PointSet& x_bd, const AssemblyOptions& opts = {});

/// Largest steady-equation residual of u_s at 100 interior points (fourth
/// order finite-difference Laplacian, h = 1e-3) and largest |lift - h| over
/// 100 boundary points. Presets are required to pass at 1e-8 and 1e-10.
struct SelfCheck {
  double steady_residual = 0.0;
  double boundary_mismatch = 0.0;
};
SelfCheck self_check(const ProblemDef& problem, std::uint64_t seed = 0);

std::vector<std::string> preset_names();

/// Registered experiment by name; "<name>_smoke" has a quarter of the
/// samples and epochs. Throws std::invalid_argument for unknown names.
ProblemDef preset(const std::string& name);

/// Supervised model with U = theta (one parameter) and target c.
ProblemDef constant_target_problem(double c, int samples = 16, int dim = 1);

}  // namespace ned
