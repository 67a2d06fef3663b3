// Forward and reverse sweeps over a ParamLayout.
//
// The forward sweep optionally carries a second-order Taylor jet along one
// input axis e_k: (value, d/dx_k, d^2/dx_k^2). The reverse sweep is the exact
// adjoint of that jet propagation, so seeding it with weights on the three
// output components yields the parameter gradient of any linear combination of
// N, dN/dx_k and d^2N/dx_k^2.
#pragma once

#include <vector>

#include "ned/net.hpp"

namespace ned::detail {

template <typename S>
struct ForwardCache {
  // z*[l] is the input of layer l; z*[layers] is the network output.
  std::vector<VectorX<S>> z0, z1, z2;
  std::vector<VectorX<S>> h0, h1, h2;
  bool jet = false;
};

template <typename S>
void forward_pass(const ParamLayout& lay, const double* theta, const VectorX<S>& x, int dir,
                  ForwardCache<S>& c) {
  const std::size_t n = lay.layers.size();
  c.jet = dir >= 0;
  c.z0.resize(n + 1);
  c.h0.resize(n);
  if (c.jet) {
    c.z1.resize(n + 1);
    c.z2.resize(n + 1);
    c.h1.resize(n);
    c.h2.resize(n);
    c.z1[0] = VectorX<S>::Zero(x.size());
    c.z1[0](dir) = S(1);
    c.z2[0] = VectorX<S>::Zero(x.size());
  }
  c.z0[0] = x;
  using MapW = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using MapV = Eigen::Map<const Eigen::VectorXd>;
  for (std::size_t l = 0; l < n; ++l) {
    const LayerLayout& L = lay.layers[l];
    const MapV b(theta + L.b, L.out);
    if (L.in == 0) {
      c.h0[l] = b.template cast<S>();
      if (c.jet) {
        c.h1[l] = VectorX<S>::Zero(L.out);
        c.h2[l] = VectorX<S>::Zero(L.out);
      }
    } else {
      const MapW w(theta + L.w, L.out, L.in);
      if constexpr (std::is_same_v<S, double>) {
        c.h0[l].noalias() = w * c.z0[l];
        c.h0[l] += b;
        if (c.jet) {
          c.h1[l].noalias() = w * c.z1[l];
          c.h2[l].noalias() = w * c.z2[l];
        }
      } else {
        const auto ws = w.template cast<S>();
        c.h0[l] = ws * c.z0[l] + b.template cast<S>();
        if (c.jet) {
          c.h1[l] = ws * c.z1[l];
          c.h2[l] = ws * c.z2[l];
        }
      }
    }
    VectorX<S>& a0 = c.z0[l + 1];
    a0.resize(L.out);
    if (c.jet) {
      c.z1[l + 1].resize(L.out);
      c.z2[l + 1].resize(L.out);
    }
    if (L.activated) {
      for (Eigen::Index i = 0; i < L.out; ++i) {
        const S pa = L.pa >= 0 ? S(theta[L.pa + i]) : S(1);
        const S pb = L.pb >= 0 ? S(theta[L.pb + i]) : S(0);
        const ActDerivs<S> d = activate<S>(L.act, c.h0[l](i), pa, pb);
        a0(i) = d.s0;
        if (c.jet) {
          const S h1 = c.h1[l](i);
          c.z1[l + 1](i) = d.s1 * h1;
          c.z2[l + 1](i) = d.s2 * h1 * h1 + d.s1 * c.h2[l](i);
        }
      }
    } else {
      a0 = c.h0[l];
      if (c.jet) {
        c.z1[l + 1] = c.h1[l];
        c.z2[l + 1] = c.h2[l];
      }
    }
    if (L.skip_from >= 0) {
      a0 += c.z0[L.skip_from];
      if (c.jet) {
        c.z1[l + 1] += c.z1[L.skip_from];
        c.z2[l + 1] += c.z2[L.skip_from];
      }
    }
  }
}

struct BackwardWork {
  std::vector<Vector> g0, g1, g2;  // adjoints of layer inputs
  Vector hb0, hb1, hb2;
};

/// Accumulates into grad (length lay.size) the parameter gradient of
///   seed0 . N + seed1 . dN/dx_k + seed2 . d2N/dx_k2
/// at the point cached by the forward sweep. Without a jet only seed0 is used.
inline void backward_pass(const ParamLayout& lay, const double* theta, const ForwardCache<double>& c,
                          const Vector& seed0, const Vector* seed1, const Vector* seed2, double* grad,
                          BackwardWork& wk) {
  const std::size_t n = lay.layers.size();
  const bool jet = c.jet;
  wk.g0.resize(n + 1);
  if (jet) {
    wk.g1.resize(n + 1);
    wk.g2.resize(n + 1);
  }
  for (std::size_t l = 0; l <= n; ++l) {
    const Eigen::Index sz = c.z0[l].size();
    wk.g0[l].setZero(sz);
    if (jet) {
      wk.g1[l].setZero(sz);
      wk.g2[l].setZero(sz);
    }
  }
  wk.g0[n] = seed0;
  if (jet) {
    wk.g1[n] = *seed1;
    wk.g2[n] = *seed2;
  }
  using MapW = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using MapGW = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  for (std::size_t li = n; li-- > 0;) {
    const LayerLayout& L = lay.layers[li];
    const Vector& ab0 = wk.g0[li + 1];
    if (L.skip_from >= 0) {
      wk.g0[L.skip_from] += ab0;
      if (jet) {
        wk.g1[L.skip_from] += wk.g1[li + 1];
        wk.g2[L.skip_from] += wk.g2[li + 1];
      }
    }
    if (L.activated) {
      wk.hb0.resize(L.out);
      if (jet) {
        wk.hb1.resize(L.out);
        wk.hb2.resize(L.out);
      }
      for (Eigen::Index i = 0; i < L.out; ++i) {
        const double pa = L.pa >= 0 ? theta[L.pa + i] : 1.0;
        const double pb = L.pb >= 0 ? theta[L.pb + i] : 0.0;
        const double h0 = c.h0[li](i);
        const ActDerivs<double> d = activate<double>(L.act, h0, pa, pb);
        const double a0b = ab0(i);
        ActParamDerivs<double> da{}, db{};
        const bool params = L.pa >= 0;
        if (params) activate_param_derivs<double>(L.act, h0, da, db);
        if (!jet) {
          wk.hb0(i) = a0b * d.s1;
          if (params) {
            grad[L.pa + i] += a0b * da.d0;
            grad[L.pb + i] += a0b * db.d0;
          }
          continue;
        }
        const double a1b = wk.g1[li + 1](i), a2b = wk.g2[li + 1](i);
        const double h1 = c.h1[li](i), h2 = c.h2[li](i);
        wk.hb2(i) = a2b * d.s1;
        wk.hb1(i) = a1b * d.s1 + a2b * 2.0 * d.s2 * h1;
        wk.hb0(i) = a0b * d.s1 + a1b * d.s2 * h1 + a2b * (d.s3 * h1 * h1 + d.s2 * h2);
        if (params) {
          grad[L.pa + i] += a0b * da.d0 + a1b * da.d1 * h1 + a2b * (da.d2 * h1 * h1 + da.d1 * h2);
          grad[L.pb + i] += a0b * db.d0 + a1b * db.d1 * h1 + a2b * (db.d2 * h1 * h1 + db.d1 * h2);
        }
      }
    } else {
      wk.hb0 = ab0;
      if (jet) {
        wk.hb1 = wk.g1[li + 1];
        wk.hb2 = wk.g2[li + 1];
      }
    }
    Eigen::Map<Vector>(grad + L.b, L.out) += wk.hb0;
    if (L.in == 0) continue;
    MapGW gw(grad + L.w, L.out, L.in);
    gw.noalias() += wk.hb0 * c.z0[li].transpose();
    if (jet) {
      gw.noalias() += wk.hb1 * c.z1[li].transpose();
      gw.noalias() += wk.hb2 * c.z2[li].transpose();
    }
    if (li == 0) continue;
    const MapW w(theta + L.w, L.out, L.in);
    wk.g0[li].noalias() += w.transpose() * wk.hb0;
    if (jet) {
      wk.g1[li].noalias() += w.transpose() * wk.hb1;
      wk.g2[li].noalias() += w.transpose() * wk.hb2;
    }
  }
}

}  // namespace ned::detail
