#include <doctest.h>

#include <cmath>
#include <limits>

#include "ned/linalg.hpp"
#include "oracles.hpp"

using namespace ned;

TEST_CASE("full-rank tall solve agrees with the normal equations") {
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd a = oracle::random_matrix(rng, 30, 8);
    const Vector b = oracle::random_vector(rng, 30);
    const PinvResult r = pinv_solve(a, b);
    const Vector ref = oracle::normal_equations(a, b);
    CHECK(r.rank == 8);
    CHECK((r.x - ref).norm() <= 1e-10 * ref.norm());
  }
}

TEST_CASE("wide system returns the minimum-norm solution") {
  Rng rng(2);
  const Eigen::MatrixXd a = oracle::random_matrix(rng, 5, 12);
  const Vector b = oracle::random_vector(rng, 5);
  const PinvResult r = pinv_solve(a, b);
  // minimum-norm solution is A^T (A A^T)^{-1} b
  const Eigen::MatrixXd at = a.transpose();
  std::vector<std::vector<double>> g(5, std::vector<double>(5, 0.0));
  std::vector<double> rhs(5);
  for (int i = 0; i < 5; ++i) {
    rhs[i] = b(i);
    for (int j = 0; j < 5; ++j) g[i][j] = a.row(i).dot(a.row(j));
  }
  const Vector ref = at * oracle::gauss_solve(g, rhs);
  CHECK((a * r.x - b).norm() <= 1e-12);
  CHECK((r.x - ref).norm() <= 1e-10 * ref.norm());
}

TEST_CASE("rank-deficient matrix: A A+ A = A and no null-space component") {
  Rng rng(3);
  const Eigen::MatrixXd left = oracle::random_matrix(rng, 20, 4);
  const Eigen::MatrixXd right = oracle::random_matrix(rng, 4, 9);
  const Eigen::MatrixXd a = left * right;  // rank 4
  const Eigen::MatrixXd ap = pinv(a, 1e-10);
  const double smax = svd(a).s(0);
  CHECK((a * ap * a - a).cwiseAbs().maxCoeff() <= 1e-8 * smax);
  CHECK((ap * a * ap - ap).cwiseAbs().maxCoeff() <= 1e-8 * ap.norm());

  const Vector b = oracle::random_vector(rng, 20);
  const PinvResult r = pinv_solve(a, b, 1e-10);
  CHECK(r.rank == 4);
  // x lies in the row space: it is unchanged by projecting onto range(right^T)
  const Eigen::MatrixXd rt = right.transpose();
  const Vector proj = rt * (rt.transpose() * rt).ldlt().solve(rt.transpose() * r.x);
  CHECK((proj - r.x).norm() <= 1e-10 * r.x.norm());
}

TEST_CASE("truncation drops small singular values") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
  a(0, 0) = 1.0;
  a(1, 1) = 1e-4;
  a(2, 2) = 1e-9;
  const Vector b = Vector::Ones(3);
  const PinvResult loose = pinv_solve(a, b, 1e-6);
  CHECK(loose.rank == 2);
  CHECK(loose.x(0) == doctest::Approx(1.0));
  CHECK(loose.x(1) == doctest::Approx(1e4));
  CHECK(loose.x(2) == 0.0);
  CHECK(pinv_solve(a, b, 1e-12).rank == 3);
}

TEST_CASE("exactly zero rows and columns are skipped") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 3);
  a(0, 0) = 2.0;
  a(2, 0) = 1.0;
  a(3, 2) = 4.0;
  Vector b(4);
  b << 1.0, 7.0, 3.0, 8.0;
  const PinvResult r = pinv_solve(a, b);
  CHECK(r.x(0) == doctest::Approx(1.0));  // (2*1 + 1*3) / 5
  CHECK(r.x(1) == 0.0);
  CHECK(r.x(2) == doctest::Approx(2.0));
  CHECK(r.rank == 2);
}

TEST_CASE("zero matrix gives a flagged zero direction") {
  const PinvResult r = pinv_solve(Eigen::MatrixXd::Zero(3, 2), Vector::Ones(3));
  CHECK(r.rank_zero);
  CHECK(r.x.isZero(0.0));
}

TEST_CASE("non-finite input is rejected") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
  a(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(pinv_solve(a, Vector::Ones(2)), std::invalid_argument);
  CHECK_THROWS_AS(svd(a), std::invalid_argument);
}

TEST_CASE("thin SVD reconstructs the matrix") {
  Rng rng(4);
  for (auto [m, n] : {std::pair{7, 3}, std::pair{3, 7}, std::pair{5, 5}}) {
    const Eigen::MatrixXd a = oracle::random_matrix(rng, m, n);
    const SvdFactors f = svd(a);
    CHECK(f.s.size() == std::min(m, n));
    CHECK((f.u * f.s.asDiagonal() * f.vt - a).norm() <= 1e-12);
    for (Eigen::Index i = 1; i < f.s.size(); ++i) CHECK(f.s(i) <= f.s(i - 1));
  }
}

TEST_CASE("deflation-prone matrices solve to finite values") {
  // many identical columns and tiny entries trip the divide-and-conquer
  // deflation path
  Rng rng(6);
  Eigen::MatrixXd a(60, 40);
  for (Eigen::Index j = 0; j < 40; ++j) a.col(j) = (j % 3 == 0) ? Vector(oracle::random_vector(rng, 60)) : Vector(a.col(0) * 1e-300);
  const PinvResult r = pinv_solve(a, oracle::random_vector(rng, 60), 1e-3);
  CHECK(r.x.allFinite());
}
