#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ned/linalg.hpp"
#include "ned/net.hpp"

namespace ned {

/// Raised when an input Laplacian is requested through an activation whose
/// second derivative is not a function (relu, relu_plus_sin).
class UnsupportedActivation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Source term of the steady residual R = Laplacian(U) + f(U, x), with df = df/du.
struct PdeTerms {
  std::function<double(double u, const Vector& x)> f;
  std::function<double(double u, const Vector& x)> df;
};

enum class RowKind { interior, boundary };

struct JacobianBlock {
  DenseMatrix a;                        ///< samples x |theta|
  std::vector<Eigen::Index> samples;    ///< row i came from column samples[i] of X
};

struct ResidualVec {
  Vector r;
  std::vector<RowKind> tags;
};

/// Row-parallel assembly. Rows are computed independently into their own
/// slots, so results do not depend on `threads`.
struct AssemblyOptions {
  int threads = 1;
};

/// Rows dU(x_i; theta)/dtheta, including the distance factor of an ansatz.
JacobianBlock param_jacobian(const Network& net, const ParamVec& theta, const PointSet& x,
                             const AssemblyOptions& opts = {});

/// Sum of pure second derivatives d^2U/dx_k^2, one jet pass per axis.
double laplacian_x(const Network& net, const ParamVec& theta, const Vector& x);

/// U and Laplacian(U) at every column of X.
struct ValueLaplacian {
  Vector u;
  Vector lap;
};
ValueLaplacian value_laplacian(const Network& net, const ParamVec& theta, const PointSet& x,
                               const AssemblyOptions& opts = {});

/// R_i = Laplacian(U)(x_i) + f(U(x_i), x_i), all tagged interior.
ResidualVec pde_residual(const PdeTerms& pde, const Network& net, const ParamVec& theta, const PointSet& x,
                         const AssemblyOptions& opts = {});

/// Residual together with its parameter Jacobian
///   grad_theta Laplacian(U) + f'(U) grad_theta U.
std::pair<JacobianBlock, ResidualVec> pde_residual_jacobian(const PdeTerms& pde, const Network& net,
                                                            const ParamVec& theta, const PointSet& x,
                                                            const AssemblyOptions& opts = {});

/// sum_i w_i dU(x_i)/dtheta, without forming the Jacobian. Partial sums are
/// taken over fixed row chunks and added in order, so the result does not
/// depend on the thread count.
Vector weighted_param_gradient(const Network& net, const ParamVec& theta, const PointSet& x, const Vector& w,
                               const AssemblyOptions& opts = {});

/// sum_i w_i dR(x_i)/dtheta, same reduction order guarantee.
Vector weighted_residual_gradient(const PdeTerms& pde, const Network& net, const ParamVec& theta,
                                  const PointSet& x, const Vector& w, const AssemblyOptions& opts = {});

enum class FdOp { param_jacobian, laplacian, pde_residual_jacobian };

FdOp fd_op_from_string(const std::string& name);
std::string to_string(FdOp op);

struct FdReport {
  FdOp op = FdOp::param_jacobian;
  double max_rel = 0.0;   ///< over checked samples
  int checked = 0;
  std::vector<Eigen::Index> excluded;  ///< samples near an activation kink
  double tol = 0.0;
  bool passed() const { return max_rel <= tol; }
};

/// Compares the analytic operator with central differences of step `step`.
/// Parameter and x differences are taken in long double on the forward map;
/// the residual Jacobian differences the analytic residual. Errors are
/// normwise per sample: max_j |a_j - f_j| / max(max_j |f_j|, 1e-6). Samples
/// with a pre-activation within 10*step*(1 + max|layer input|) of a kink are
/// reported in `excluded` and not scored.
FdReport fd_validate(FdOp op, const Network& net, const ParamVec& theta, const PointSet& x, double step, double tol,
                     const PdeTerms* pde = nullptr);

}  // namespace ned
