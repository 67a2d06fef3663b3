#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ned {

/// relu:          max(h, 0)
/// relu3:         max(h, 0)^3                      (C^2)
/// sigma2:        a*max(h,0) + b*h*max(h,0)        per-neuron trainable a, b
/// relu_plus_sin: a*max(h,0) + b*sin(h)            per-neuron trainable a, b
enum class Activation { relu, relu3, sigma2, relu_plus_sin };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::relu3: return "relu3";
    case Activation::sigma2: return "sigma2";
    case Activation::relu_plus_sin: return "relu_plus_sin";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "relu3") return Activation::relu3;
  if (s == "sigma2") return Activation::sigma2;
  if (s == "relu_plus_sin") return Activation::relu_plus_sin;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

constexpr bool has_params(Activation a) {
  return a == Activation::sigma2 || a == Activation::relu_plus_sin;
}

/// Twice continuously differentiable in h (input Laplacians are defined).
constexpr bool is_c2(Activation a) { return a == Activation::relu3 || a == Activation::sigma2; }

/// Default trainable-parameter values (a, b).
constexpr double default_param_a(Activation) { return 1.0; }
constexpr double default_param_b(Activation a) { return a == Activation::sigma2 ? 1.0 : 0.0; }

/// sigma and its first three h-derivatives. At kinks the one-sided value from
/// the left is used (relu'(0) = 0).
template <typename S>
struct ActDerivs {
  S s0, s1, s2, s3;
};

/// Partials of (s0, s1, s2) with respect to one activation parameter.
template <typename S>
struct ActParamDerivs {
  S d0, d1, d2;
};

template <typename S>
inline ActDerivs<S> activate(Activation act, S h, S pa, S pb) {
  using std::cos;
  using std::sin;
  const S step = h > S(0) ? S(1) : S(0);
  const S r = h > S(0) ? h : S(0);
  switch (act) {
    case Activation::relu: return {r, step, S(0), S(0)};
    case Activation::relu3: return {r * r * r, S(3) * r * r, S(6) * r, S(6) * step};
    case Activation::sigma2: return {pa * r + pb * h * r, pa * step + S(2) * pb * r, S(2) * pb * step, S(0)};
    case Activation::relu_plus_sin: {
      const S sn = sin(h), cs = cos(h);
      return {pa * r + pb * sn, pa * step + pb * cs, -pb * sn, -pb * cs};
    }
  }
  return {S(0), S(0), S(0), S(0)};
}

/// Derivatives with respect to the (a, b) parameters.
template <typename S>
inline void activate_param_derivs(Activation act, S h, ActParamDerivs<S>& da, ActParamDerivs<S>& db) {
  using std::cos;
  using std::sin;
  const S step = h > S(0) ? S(1) : S(0);
  const S r = h > S(0) ? h : S(0);
  da = {r, step, S(0)};
  switch (act) {
    case Activation::sigma2: db = {h * r, S(2) * r, S(2) * step}; break;
    case Activation::relu_plus_sin: db = {sin(h), cos(h), -sin(h)}; break;
    default: db = {S(0), S(0), S(0)}; break;
  }
}

}  // namespace ned
