#include "ned/linalg.hpp"

#include <eigen_patched/PatchedBDCSVD.h>

#include <string>
#include <vector>

namespace ned {

namespace {

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& a, const char* what) {
  if (!a.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

// Minimum-norm solve against a square factor already in hand.
PinvResult solve_square(const Eigen::MatrixXd& r, const Vector& c, double rel_tol) {
  Eigen::PatchedBDCSVD<Eigen::MatrixXd> dec(r, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) throw SolverFailure("pinv_solve: SVD did not converge");
  const Vector& s = dec.singularValues();
  PinvResult out;
  out.x = Vector::Zero(r.cols());
  out.sigma_max = s.size() > 0 ? s(0) : 0.0;
  const double cut = rel_tol * out.sigma_max;
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > cut && s(rank) > 0.0) ++rank;
  out.rank = rank;
  out.rank_zero = rank == 0;
  if (rank == 0) return out;
  Vector coef = dec.matrixU().leftCols(rank).transpose() * c;
  coef.array() /= s.head(rank).array();
  out.x = dec.matrixV().leftCols(rank) * coef;
  return out;
}

}  // namespace

SvdFactors svd(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  require_finite(a, "svd");
  Eigen::PatchedBDCSVD<Eigen::MatrixXd> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) throw SolverFailure("svd: did not converge");
  return {dec.matrixU(), dec.singularValues(), dec.matrixV().transpose()};
}

PinvResult pinv_solve(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Vector>& b,
                      double rel_tol) {
  if (b.size() != a.rows())
    throw std::invalid_argument("pinv_solve: rhs length " + std::to_string(b.size()) + " != rows " +
                                std::to_string(a.rows()));
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw std::invalid_argument("pinv_solve: rel_tol must lie in (0,1)");
  require_finite(a, "pinv_solve");
  if (!b.allFinite()) throw std::invalid_argument("pinv_solve: non-finite rhs");

  // Exactly-zero rows and columns (dead units, pinned boundary rows) carry no
  // information and get zero weight in A^+ b. Dropping them also keeps exact
  // zeros out of the divide-and-conquer SVD, whose deflation step in Eigen
  // 3.4.0 reads out of bounds on them.
  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    if (!a.row(i).isZero(0.0)) rows.push_back(i);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    if (!a.col(j).isZero(0.0)) cols.push_back(j);
  const auto m = static_cast<Eigen::Index>(rows.size()), n = static_cast<Eigen::Index>(cols.size());
  if (m == 0 || n == 0) {
    PinvResult out;
    out.x = Vector::Zero(a.cols());
    out.rank_zero = true;
    return out;
  }
  const bool full = m == a.rows() && n == a.cols();
  Eigen::MatrixXd ar;
  Vector br;
  if (!full) {
    ar = a(rows, cols);
    br = b(rows);
  }
  const Eigen::Ref<const Eigen::MatrixXd> as = full ? a : Eigen::Ref<const Eigen::MatrixXd>(ar);
  const Eigen::Ref<const Vector> bs = full ? b : Eigen::Ref<const Vector>(br);

  PinvResult res;
  if (m >= n) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(as);
    Vector qtb = qr.householderQ().transpose() * bs;
    Eigen::MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    res = solve_square(r, qtb.head(n), rel_tol);
  } else {
    // A^T = Q R  =>  A = R^T Q^T  and  A^+ b = Q (R^T)^+ b.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(as.transpose());
    Eigen::MatrixXd rt = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    rt.transposeInPlace();
    res = solve_square(rt, bs, rel_tol);
    Vector padded = Vector::Zero(n);
    padded.head(m) = res.x;
    res.x = qr.householderQ() * padded;
  }
  if (!res.x.allFinite()) throw SolverFailure("pinv_solve: non-finite solution");
  if (!full) {
    Vector x = Vector::Zero(a.cols());
    x(cols) = res.x;
    res.x = std::move(x);
  }
  return res;
}

PinvResult pinv_solve(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Vector>& b) {
  return pinv_solve(a, b, default_rel_tol(a.rows(), a.cols()));
}

Eigen::MatrixXd pinv(const Eigen::Ref<const Eigen::MatrixXd>& a, double rel_tol) {
  SvdFactors f = svd(a);
  const double cut = rel_tol * (f.s.size() > 0 ? f.s(0) : 0.0);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < f.s.size(); ++i) {
    if (!(f.s(i) > cut) || f.s(i) == 0.0) break;
    out.noalias() += (f.vt.row(i).transpose() / f.s(i)) * f.u.col(i).transpose();
  }
  return out;
}

}  // namespace ned
