#include "ned/deriv.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "passes.hpp"

namespace ned {

namespace {

constexpr Eigen::Index kChunk = 256;

void require_c2(const Network& net) {
  for (const LayerLayout& L : net.layout().layers)
    if (L.activated && !is_c2(L.act))
      throw UnsupportedActivation("input Laplacian needs a C^2 activation, got " + std::string(to_string(L.act)));
}

void require_scalar(const Network& net) {
  if (net.spec().output_dim != 1) throw std::invalid_argument("derivatives need a scalar-output network");
}

void require_points(const Network& net, const PointSet& x) {
  if (x.rows() != net.input_dim())
    throw std::invalid_argument("points have dimension " + std::to_string(x.rows()) + ", network expects " +
                                std::to_string(net.input_dim()));
}

// Runs fn(begin, end, worker) over [0, n) split into contiguous ranges.
template <typename Fn>
void parallel_ranges(Eigen::Index n, int threads, Fn&& fn) {
  const int t = static_cast<int>(std::clamp<Eigen::Index>(threads, 1, std::max<Eigen::Index>(n, 1)));
  if (t == 1) {
    fn(Eigen::Index{0}, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  const Eigen::Index per = (n + t - 1) / t;
  for (int k = 0; k < t; ++k) {
    const Eigen::Index b = k * per, e = std::min(n, b + per);
    if (b >= e) break;
    pool.emplace_back([&, b, e, k] { fn(b, e, k); });
  }
  for (auto& th : pool) th.join();
}

enum class GradMode { none, value, residual };

struct PointResult {
  double u = 0.0, lap = 0.0;
};

struct Worker {
  detail::ForwardCache<double> cache;
  detail::BackwardWork back;
  Vector s0, s1, s2;
};

// Value, optional Laplacian, and optionally grad += w * d(U or R)/dtheta at x.
PointResult eval_point(const Network& net, const double* theta, const PdeTerms* pde, const Vector& x, bool lap,
                       GradMode mode, double w, double* grad, Worker& wk) {
  const ParamLayout& lay = net.layout();
  const int d = net.input_dim();
  double L = 1.0, ell = 0.0;
  Vector Lg, Lh, ellh;
  if (net.has_ansatz()) {
    const AnsatzSpec& a = *net.spec().ansatz;
    FieldJet dj = a.distance(x), lj = a.lift(x);
    L = dj.value;
    ell = lj.value;
    Lg = std::move(dj.grad);
    Lh = std::move(dj.hess_diag);
    ellh = std::move(lj.hess_diag);
  }
  const bool ans = net.has_ansatz();
  wk.s0.resize(1);
  wk.s1.resize(1);
  wk.s2.resize(1);
  PointResult out;
  if (!lap) {
    detail::forward_pass<double>(lay, theta, x, -1, wk.cache);
    out.u = L * wk.cache.z0.back()(0) + ell;
    if (mode == GradMode::value) {
      wk.s0(0) = w * L;
      detail::backward_pass(lay, theta, wk.cache, wk.s0, nullptr, nullptr, grad, wk.back);
    }
    return out;
  }
  for (int k = 0; k < d; ++k) {
    detail::forward_pass<double>(lay, theta, x, k, wk.cache);
    const double n0 = wk.cache.z0.back()(0), n1 = wk.cache.z1.back()(0), n2 = wk.cache.z2.back()(0);
    const double Lk = ans ? Lg(k) : 0.0, Lkk = ans ? Lh(k) : 0.0, ellkk = ans ? ellh(k) : 0.0;
    out.lap += Lkk * n0 + 2.0 * Lk * n1 + L * n2 + ellkk;
    if (k == 0) out.u = L * n0 + ell;
    if (mode == GradMode::residual) {
      double c0 = Lkk;
      if (k == 0) c0 += pde->df(out.u, x) * L;
      wk.s0(0) = w * c0;
      wk.s1(0) = w * 2.0 * Lk;
      wk.s2(0) = w * L;
      detail::backward_pass(lay, theta, wk.cache, wk.s0, &wk.s1, &wk.s2, grad, wk.back);
    } else if (mode == GradMode::value && k == 0) {
      wk.s0(0) = w * L;
      wk.s1(0) = 0.0;
      wk.s2(0) = 0.0;
      detail::backward_pass(lay, theta, wk.cache, wk.s0, &wk.s1, &wk.s2, grad, wk.back);
    }
  }
  return out;
}

JacobianBlock make_block(Eigen::Index rows, Eigen::Index cols) {
  JacobianBlock j;
  j.a = DenseMatrix::Zero(rows, cols);
  j.samples.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) j.samples[i] = i;
  return j;
}

ResidualVec interior(Vector r) {
  ResidualVec out;
  out.tags.assign(r.size(), RowKind::interior);
  out.r = std::move(r);
  return out;
}

Vector chunked_gradient(const Network& net, const ParamVec& theta, const PdeTerms* pde, const PointSet& x,
                        const Vector& w, GradMode mode, const AssemblyOptions& opts) {
  if (w.size() != x.cols()) throw std::invalid_argument("weight vector length must match the sample count");
  const Eigen::Index n = x.cols(), p = net.num_params();
  const Eigen::Index chunks = (n + kChunk - 1) / kChunk;
  Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(p, chunks);
  const bool lap = mode == GradMode::residual;
  parallel_ranges(chunks, opts.threads, [&](Eigen::Index b, Eigen::Index e, int) {
    Worker wk;
    for (Eigen::Index c = b; c < e; ++c) {
      double* g = partial.col(c).data();
      for (Eigen::Index i = c * kChunk; i < std::min(n, (c + 1) * kChunk); ++i)
        eval_point(net, theta.values.data(), pde, x.col(i), lap, mode, w(i), g, wk);
    }
  });
  Vector out = Vector::Zero(p);
  for (Eigen::Index c = 0; c < chunks; ++c) out += partial.col(c);
  return out;
}

}  // namespace

JacobianBlock param_jacobian(const Network& net, const ParamVec& theta, const PointSet& x,
                             const AssemblyOptions& opts) {
  net.check(theta);
  require_scalar(net);
  require_points(net, x);
  JacobianBlock j = make_block(x.cols(), net.num_params());
  parallel_ranges(x.cols(), opts.threads, [&](Eigen::Index b, Eigen::Index e, int) {
    Worker wk;
    for (Eigen::Index i = b; i < e; ++i)
      eval_point(net, theta.values.data(), nullptr, x.col(i), false, GradMode::value, 1.0, j.a.row(i).data(), wk);
  });
  return j;
}

double laplacian_x(const Network& net, const ParamVec& theta, const Vector& x) {
  net.check(theta);
  require_scalar(net);
  require_c2(net);
  if (x.size() != net.input_dim()) throw std::invalid_argument("laplacian_x: point dimension mismatch");
  Worker wk;
  return eval_point(net, theta.values.data(), nullptr, x, true, GradMode::none, 0.0, nullptr, wk).lap;
}

ValueLaplacian value_laplacian(const Network& net, const ParamVec& theta, const PointSet& x,
                               const AssemblyOptions& opts) {
  net.check(theta);
  require_scalar(net);
  require_c2(net);
  require_points(net, x);
  ValueLaplacian out{Vector(x.cols()), Vector(x.cols())};
  parallel_ranges(x.cols(), opts.threads, [&](Eigen::Index b, Eigen::Index e, int) {
    Worker wk;
    for (Eigen::Index i = b; i < e; ++i) {
      const PointResult r =
          eval_point(net, theta.values.data(), nullptr, x.col(i), true, GradMode::none, 0.0, nullptr, wk);
      out.u(i) = r.u;
      out.lap(i) = r.lap;
    }
  });
  return out;
}

ResidualVec pde_residual(const PdeTerms& pde, const Network& net, const ParamVec& theta, const PointSet& x,
                         const AssemblyOptions& opts) {
  const ValueLaplacian vl = value_laplacian(net, theta, x, opts);
  Vector r(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) r(i) = vl.lap(i) + pde.f(vl.u(i), x.col(i));
  return interior(std::move(r));
}

std::pair<JacobianBlock, ResidualVec> pde_residual_jacobian(const PdeTerms& pde, const Network& net,
                                                            const ParamVec& theta, const PointSet& x,
                                                            const AssemblyOptions& opts) {
  net.check(theta);
  require_scalar(net);
  require_c2(net);
  require_points(net, x);
  JacobianBlock j = make_block(x.cols(), net.num_params());
  Vector r(x.cols());
  parallel_ranges(x.cols(), opts.threads, [&](Eigen::Index b, Eigen::Index e, int) {
    Worker wk;
    for (Eigen::Index i = b; i < e; ++i) {
      const Vector xi = x.col(i);
      const PointResult p =
          eval_point(net, theta.values.data(), &pde, xi, true, GradMode::residual, 1.0, j.a.row(i).data(), wk);
      r(i) = p.lap + pde.f(p.u, xi);
    }
  });
  return {std::move(j), interior(std::move(r))};
}

Vector weighted_param_gradient(const Network& net, const ParamVec& theta, const PointSet& x, const Vector& w,
                               const AssemblyOptions& opts) {
  net.check(theta);
  require_scalar(net);
  require_points(net, x);
  return chunked_gradient(net, theta, nullptr, x, w, GradMode::value, opts);
}

Vector weighted_residual_gradient(const PdeTerms& pde, const Network& net, const ParamVec& theta,
                                  const PointSet& x, const Vector& w, const AssemblyOptions& opts) {
  net.check(theta);
  require_scalar(net);
  require_c2(net);
  require_points(net, x);
  return chunked_gradient(net, theta, &pde, x, w, GradMode::residual, opts);
}

FdOp fd_op_from_string(const std::string& name) {
  if (name == "param_jacobian") return FdOp::param_jacobian;
  if (name == "laplacian" || name == "laplacian_x") return FdOp::laplacian;
  if (name == "pde_residual_jacobian") return FdOp::pde_residual_jacobian;
  throw std::invalid_argument("unknown derivative operation '" + name + "'");
}

std::string to_string(FdOp op) {
  switch (op) {
    case FdOp::param_jacobian: return "param_jacobian";
    case FdOp::laplacian: return "laplacian";
    case FdOp::pde_residual_jacobian: return "pde_residual_jacobian";
  }
  return "?";
}

namespace {

bool near_kink(const Network& net, const ParamVec& theta, const Vector& x, double step) {
  detail::ForwardCache<double> c;
  detail::forward_pass<double>(net.layout(), theta.values.data(), x, -1, c);
  const auto& layers = net.layout().layers;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerLayout& L = layers[l];
    if (!L.activated) continue;
    // a unit step in one weight moves h_i by at most |z|_inf
    const double thr = 10.0 * step * (1.0 + c.z0[l].cwiseAbs().maxCoeff());
    if ((c.h0[l].array().abs() <= thr).any()) return true;
  }
  return false;
}

double normwise(const Vector& a, const Vector& f) {
  const double scale = std::max(f.cwiseAbs().maxCoeff(), 1e-6);
  return (a - f).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

FdReport fd_validate(FdOp op, const Network& net, const ParamVec& theta, const PointSet& x, double step, double tol,
                     const PdeTerms* pde) {
  if (!(step > 0.0 && step < 1e-2)) throw std::invalid_argument("fd_validate: step must lie in (0, 1e-2)");
  if (op == FdOp::pde_residual_jacobian && !pde)
    throw std::invalid_argument("fd_validate: residual Jacobian needs PDE terms");
  net.check(theta);
  FdReport rep;
  rep.op = op;
  rep.tol = tol;
  const Eigen::Index np = net.num_params();
  using LVec = VectorX<long double>;
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    const Vector xs = x.col(s);
    if (near_kink(net, theta, xs, step)) {
      rep.excluded.push_back(s);
      continue;
    }
    Vector analytic, fd;
    switch (op) {
      case FdOp::param_jacobian: {
        analytic = param_jacobian(net, theta, xs).a.row(0).transpose();
        fd.resize(np);
        const LVec xl = xs.cast<long double>();
        ParamVec t = theta;
        for (Eigen::Index j = 0; j < np; ++j) {
          const double t0 = theta.values(j), tp = t0 + step, tm = t0 - step;
          t.values(j) = tp;
          const long double up = forward<long double>(net, t, xl);
          t.values(j) = tm;
          const long double um = forward<long double>(net, t, xl);
          t.values(j) = t0;
          fd(j) = static_cast<double>((up - um) / (static_cast<long double>(tp) - tm));
        }
        break;
      }
      case FdOp::laplacian: {
        analytic = Vector::Constant(1, laplacian_x(net, theta, xs));
        const LVec xl = xs.cast<long double>();
        const long double u0 = forward<long double>(net, theta, xl);
        long double acc = 0.0L;
        const long double h = step;
        for (Eigen::Index k = 0; k < xl.size(); ++k) {
          LVec xp = xl, xm = xl;
          xp(k) += h;
          xm(k) -= h;
          acc += (forward<long double>(net, theta, xp) - 2.0L * u0 + forward<long double>(net, theta, xm)) / (h * h);
        }
        fd = Vector::Constant(1, static_cast<double>(acc));
        break;
      }
      case FdOp::pde_residual_jacobian: {
        analytic = pde_residual_jacobian(*pde, net, theta, xs).first.a.row(0).transpose();
        fd.resize(np);
        ParamVec t = theta;
        for (Eigen::Index j = 0; j < np; ++j) {
          const double t0 = theta.values(j), tp = t0 + step, tm = t0 - step;
          t.values(j) = tp;
          const double rp = pde_residual(*pde, net, t, xs).r(0);
          t.values(j) = tm;
          const double rm = pde_residual(*pde, net, t, xs).r(0);
          t.values(j) = t0;
          fd(j) = (rp - rm) / (tp - tm);
        }
        break;
      }
    }
    rep.max_rel = std::max(rep.max_rel, normwise(analytic, fd));
    ++rep.checked;
  }
  return rep;
}

}  // namespace ned
