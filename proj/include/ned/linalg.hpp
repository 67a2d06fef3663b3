#pragma once

#include <Eigen/Dense>
#include <limits>
#include <stdexcept>

namespace ned {

/// Row-major dense matrix; rows of a Jacobian are written sample by sample.
template <typename Scalar>
using DenseMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using DenseMatrix = DenseMatrixT<double>;
using Vector = Eigen::VectorXd;

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SvdFactors {
  Eigen::MatrixXd u;   ///< rows x k, orthonormal columns
  Vector s;            ///< k values, nonincreasing
  Eigen::MatrixXd vt;  ///< k x cols, orthonormal rows
};

/// Thin SVD, k = min(rows, cols). Throws std::invalid_argument on non-finite
/// input and SolverFailure if the iteration does not converge.
SvdFactors svd(const Eigen::Ref<const Eigen::MatrixXd>& a);

struct PinvResult {
  Vector x;
  Eigen::Index rank = 0;
  double sigma_max = 0.0;
  bool rank_zero = false;  ///< every singular value was truncated; x == 0
};

/// max(rows, cols) * machine epsilon.
inline double default_rel_tol(Eigen::Index rows, Eigen::Index cols) {
  return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
}

/// Minimum-norm least-squares solution x = A^+ b with singular values below
/// rel_tol * sigma_max discarded. Tall systems are first reduced by a
/// Householder QR (A = QR, A^+ b = R^+ Q^T b), wide ones by an LQ on A^T;
/// the SVD is then taken of the square triangular factor, which has the same
/// singular values as A.
PinvResult pinv_solve(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Vector>& b,
                      double rel_tol);

/// pinv_solve with default_rel_tol.
PinvResult pinv_solve(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Vector>& b);

/// Explicit pseudoinverse A^+ (cols x rows), same truncation rule.
Eigen::MatrixXd pinv(const Eigen::Ref<const Eigen::MatrixXd>& a, double rel_tol);

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace ned
