#include "ned/net.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ned/rng.hpp"
#include "passes.hpp"

namespace ned {

namespace {

template <typename S>
struct Jet {
  S value;
  VectorX<S> grad, hess;
};

// Closed forms behind the registered ansatz kinds, in any scalar type so the
// long-double finite-difference oracles see the same function.
template <typename S>
void interval_jets(const std::vector<double>& p, const VectorX<S>& x, Jet<S>& dist, Jet<S>& lift) {
  const S lo = p[0], hi = p[1], hlo = p[2], hhi = p[3];
  const S t = x(0);
  dist.value = (t - lo) * (hi - t);
  dist.grad = VectorX<S>::Constant(1, hi + lo - S(2) * t);
  dist.hess = VectorX<S>::Constant(1, S(-2));
  const S slope = (hhi - hlo) / (hi - lo);
  lift.value = hlo + slope * (t - lo);
  lift.grad = VectorX<S>::Constant(1, slope);
  lift.hess = VectorX<S>::Zero(1);
}

template <typename S>
void box_jets(const std::vector<double>& p, const VectorX<S>& x, Jet<S>& dist, Jet<S>& lift) {
  using std::cos;
  using std::sin;
  const int d = static_cast<int>(p[0]);
  const bool half_norm = p[1] == 0.0;
  const bool bump = p[2] != 0.0;
  if (x.size() != d) throw std::invalid_argument("ansatz: point dimension mismatch");

  // prefix/suffix products give prod_{i != k} g_i without division
  VectorX<S> g(d), pre(d + 1), suf(d + 1);
  for (int i = 0; i < d; ++i) g(i) = x(i) * (S(1) - x(i));
  pre(0) = S(1);
  suf(d) = S(1);
  for (int i = 0; i < d; ++i) pre(i + 1) = pre(i) * g(i);
  for (int i = d; i-- > 0;) suf(i) = suf(i + 1) * g(i);
  dist.value = pre(d);
  dist.grad.resize(d);
  dist.hess.resize(d);
  for (int k = 0; k < d; ++k) {
    const S others = pre(k) * suf(k + 1);
    dist.grad(k) = (S(1) - S(2) * x(k)) * others;
    dist.hess(k) = S(-2) * others;
  }

  if (half_norm) {
    lift.value = x.squaredNorm() / S(2);
    lift.grad = x;
    lift.hess = VectorX<S>::Ones(d);
  } else {
    lift.value = S(1);
    lift.grad = VectorX<S>::Zero(d);
    lift.hess = VectorX<S>::Zero(d);
  }
  if (!bump) return;
  const S w = S(2) * std::numbers::pi_v<S>;
  const S arg = w * x.sum();
  const S sn = sin(arg), cs = cos(arg);
  lift.value += sn * dist.value;
  for (int k = 0; k < d; ++k) {
    lift.grad(k) += w * cs * dist.value + sn * dist.grad(k);
    lift.hess(k) += -w * w * sn * dist.value + S(2) * w * cs * dist.grad(k) + sn * dist.hess(k);
  }
}

template <typename S>
void registered_jets(const std::string& kind, const std::vector<double>& p, const VectorX<S>& x, Jet<S>& dist,
                     Jet<S>& lift) {
  if (kind == "interval") {
    if (x.size() != 1) throw std::invalid_argument("ansatz: interval ansatz needs 1-d points");
    interval_jets(p, x, dist, lift);
  } else if (kind == "unit_box") {
    box_jets(p, x, dist, lift);
  } else {
    throw std::invalid_argument("unknown ansatz kind '" + kind + "'");
  }
}

FieldJet to_field(const Jet<double>& j) { return {j.value, j.grad, j.hess}; }

AnsatzSpec registered(std::string kind, std::vector<double> params) {
  AnsatzSpec a;
  a.kind = kind;
  a.params = params;
  a.distance = [kind, params](const Vector& x) {
    Jet<double> d, l;
    registered_jets(kind, params, x, d, l);
    return to_field(d);
  };
  a.lift = [kind, params](const Vector& x) {
    Jet<double> d, l;
    registered_jets(kind, params, x, d, l);
    return to_field(l);
  };
  return a;
}

bool is_registered(const std::string& kind) { return kind == "interval" || kind == "unit_box"; }

}  // namespace

AnsatzSpec interval_ansatz(double lo, double hi, double h_lo, double h_hi) {
  if (!(lo < hi)) throw std::invalid_argument("interval_ansatz: need lo < hi");
  AnsatzSpec a = registered("interval", {lo, hi, h_lo, h_hi});
  a.boundary = [lo, h_lo, h_hi](const Vector& x) { return x(0) <= lo ? h_lo : h_hi; };
  return a;
}

AnsatzSpec unit_box_ansatz(int dim, BoxLift base, bool sine_bump) {
  if (dim < 1) throw std::invalid_argument("unit_box_ansatz: dim must be >= 1");
  AnsatzSpec a =
      registered("unit_box", {double(dim), base == BoxLift::half_norm_sq ? 0.0 : 1.0, sine_bump ? 1.0 : 0.0});
  if (base == BoxLift::half_norm_sq)
    a.boundary = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
  else
    a.boundary = [](const Vector&) { return 1.0; };
  return a;
}

AnsatzSpec make_ansatz(const std::string& kind, const std::vector<double>& params) {
  if (kind == "interval") {
    if (params.size() != 4) throw std::invalid_argument("interval ansatz takes 4 parameters");
    return interval_ansatz(params[0], params[1], params[2], params[3]);
  }
  if (kind == "unit_box") {
    if (params.size() != 3) throw std::invalid_argument("unit_box ansatz takes 3 parameters");
    return unit_box_ansatz(static_cast<int>(params[0]), params[1] == 0.0 ? BoxLift::half_norm_sq : BoxLift::one,
                           params[2] != 0.0);
  }
  throw std::invalid_argument("unknown ansatz kind '" + kind + "'");
}

NetworkSpec NetworkSpec::fnn(int input_dim, std::vector<int> widths, Activation act) {
  NetworkSpec s;
  s.input_dim = input_dim;
  s.arch = Architecture::fnn;
  s.activations.assign(widths.size(), act);
  s.widths = std::move(widths);
  s.validate();
  return s;
}

NetworkSpec NetworkSpec::resnet(int input_dim, int blocks, int width, Activation act) {
  NetworkSpec s;
  s.input_dim = input_dim;
  s.arch = Architecture::resnet;
  s.blocks = blocks;
  s.block_width = width;
  s.block_activation = act;
  s.validate();
  return s;
}

NetworkSpec NetworkSpec::constant(int input_dim) {
  NetworkSpec s;
  s.input_dim = input_dim;
  s.arch = Architecture::constant;
  return s;
}

void NetworkSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("NetworkSpec: input_dim must be >= 1");
  if (output_dim < 1) throw std::invalid_argument("NetworkSpec: output_dim must be >= 1");
  switch (arch) {
    case Architecture::constant:
      if (output_dim != 1) throw std::invalid_argument("NetworkSpec: constant net has one output");
      break;
    case Architecture::fnn:
      if (widths.size() != activations.size())
        throw std::invalid_argument("NetworkSpec: one activation per hidden layer required");
      for (int w : widths)
        if (w < 1) throw std::invalid_argument("NetworkSpec: widths must be >= 1");
      break;
    case Architecture::resnet:
      if (blocks < 1 || block_width < 1) throw std::invalid_argument("NetworkSpec: resnet needs blocks, width >= 1");
      break;
  }
  if (ansatz && output_dim != 1) throw std::invalid_argument("NetworkSpec: ansatz needs a scalar output");
}

int NetworkSpec::depth() const {
  switch (arch) {
    case Architecture::constant: return 0;
    case Architecture::fnn: return static_cast<int>(widths.size());
    case Architecture::resnet: return 2 * blocks;
  }
  return 0;
}

int NetworkSpec::max_width() const {
  int m = 0;
  if (arch == Architecture::fnn)
    for (int w : widths) m = std::max(m, w);
  if (arch == Architecture::resnet) m = block_width;
  return m;
}

ParamLayout make_layout(const NetworkSpec& spec) {
  spec.validate();
  ParamLayout lay;
  lay.input_dim = spec.input_dim;
  lay.output_dim = spec.output_dim;
  Eigen::Index off = 0;
  auto add = [&](Eigen::Index in, Eigen::Index out, bool activated, Activation act, int skip) {
    const std::string tag = "L" + std::to_string(lay.layers.size());
    LayerLayout L;
    L.in = in;
    L.out = out;
    L.activated = activated;
    L.act = act;
    L.skip_from = skip;
    if (in > 0) {
      L.w = off;
      lay.blocks.push_back({tag + ".w", off, out, in});
      off += in * out;
    }
    L.b = off;
    lay.blocks.push_back({tag + ".b", off, out, 1});
    off += out;
    if (activated && has_params(act)) {
      L.pa = off;
      lay.blocks.push_back({tag + ".a", off, out, 1});
      off += out;
      L.pb = off;
      lay.blocks.push_back({tag + ".bb", off, out, 1});
      off += out;
    }
    lay.layers.push_back(L);
  };
  switch (spec.arch) {
    case Architecture::constant:
      add(0, 1, false, Activation::relu, -1);
      break;
    case Architecture::fnn: {
      Eigen::Index prev = spec.input_dim;
      for (std::size_t i = 0; i < spec.widths.size(); ++i) {
        add(prev, spec.widths[i], true, spec.activations[i], -1);
        prev = spec.widths[i];
      }
      add(prev, spec.output_dim, false, Activation::relu, -1);
      break;
    }
    case Architecture::resnet: {
      const Eigen::Index w = spec.block_width;
      add(spec.input_dim, w, false, Activation::relu, -1);
      for (int k = 0; k < spec.blocks; ++k) {
        const int first = static_cast<int>(lay.layers.size());
        add(w, w, true, spec.block_activation, -1);
        add(w, w, true, spec.block_activation, first);
      }
      add(w, spec.output_dim, false, Activation::relu, -1);
      break;
    }
  }
  lay.size = off;
  return lay;
}

Network::Network(NetworkSpec spec)
    : spec_(std::move(spec)), layout_(std::make_shared<const ParamLayout>(make_layout(spec_))) {
  if (spec_.ansatz) {
    const AnsatzSpec& a = *spec_.ansatz;
    if (!a.distance || !a.lift) throw std::invalid_argument("Network: ansatz needs distance and lift");
  }
}

void Network::check(const ParamVec& theta) const {
  if (theta.values.size() != layout_->size)
    throw std::invalid_argument("parameter vector has length " + std::to_string(theta.values.size()) +
                                ", network expects " + std::to_string(layout_->size));
}

std::vector<LayerParams> unflatten(const ParamVec& theta) {
  if (!theta.layout) throw std::invalid_argument("unflatten: ParamVec has no layout");
  const ParamLayout& lay = *theta.layout;
  if (theta.values.size() != lay.size) throw std::invalid_argument("unflatten: length does not match layout");
  std::vector<LayerParams> out;
  const double* p = theta.values.data();
  for (const LayerLayout& L : lay.layers) {
    LayerParams lp;
    lp.w = Eigen::Map<const DenseMatrix>(p + L.w, L.out, L.in);
    lp.b = Eigen::Map<const Vector>(p + L.b, L.out);
    if (L.pa >= 0) {
      lp.a = Eigen::Map<const Vector>(p + L.pa, L.out);
      lp.bb = Eigen::Map<const Vector>(p + L.pb, L.out);
    }
    out.push_back(std::move(lp));
  }
  return out;
}

ParamVec flatten(const Network& net, const std::vector<LayerParams>& layers) {
  const ParamLayout& lay = net.layout();
  if (layers.size() != lay.layers.size()) throw std::invalid_argument("flatten: layer count mismatch");
  ParamVec theta = net.zeros();
  double* p = theta.values.data();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerLayout& L = lay.layers[i];
    const LayerParams& lp = layers[i];
    if (lp.w.rows() != L.out || lp.w.cols() != L.in || lp.b.size() != L.out)
      throw std::invalid_argument("flatten: shape mismatch in layer " + std::to_string(i));
    Eigen::Map<DenseMatrix>(p + L.w, L.out, L.in) = lp.w;
    Eigen::Map<Vector>(p + L.b, L.out) = lp.b;
    if (L.pa >= 0) {
      if (lp.a.size() != L.out || lp.bb.size() != L.out)
        throw std::invalid_argument("flatten: activation parameter shape mismatch in layer " + std::to_string(i));
      Eigen::Map<Vector>(p + L.pa, L.out) = lp.a;
      Eigen::Map<Vector>(p + L.pb, L.out) = lp.bb;
    }
  }
  return theta;
}

ParamVec init_params(const Network& net, std::uint64_t seed, InitMode mode) {
  Rng rng(derive_seed(seed, "init"));
  ParamVec theta = net.zeros();
  double* p = theta.values.data();
  for (const LayerLayout& L : net.layout().layers) {
    const double fan_in = L.in > 0 ? static_cast<double>(L.in) : 1.0;
    const double c = mode == InitMode::scaled ? 1.0 / std::sqrt(fan_in) : std::sqrt(fan_in);
    for (Eigen::Index i = 0; i < L.in * L.out; ++i) p[L.w + i] = rng.uniform(-c, c);
    for (Eigen::Index i = 0; i < L.out; ++i) p[L.b + i] = rng.uniform(-c, c);
    if (L.pa >= 0) {
      for (Eigen::Index i = 0; i < L.out; ++i) {
        p[L.pa + i] = default_param_a(L.act);
        p[L.pb + i] = default_param_b(L.act);
      }
    }
  }
  return theta;
}

template <typename Scalar>
VectorX<Scalar> forward_raw(const Network& net, const ParamVec& theta, const VectorX<Scalar>& x) {
  net.check(theta);
  if (x.size() != net.input_dim())
    throw std::invalid_argument("forward: point has dimension " + std::to_string(x.size()) + ", expected " +
                                std::to_string(net.input_dim()));
  detail::ForwardCache<Scalar> c;
  detail::forward_pass<Scalar>(net.layout(), theta.values.data(), x, -1, c);
  return c.z0.back();
}

template <typename Scalar>
Scalar forward(const Network& net, const ParamVec& theta, const VectorX<Scalar>& x) {
  if (net.spec().output_dim != 1) throw std::invalid_argument("forward: network has several outputs");
  const Scalar n = forward_raw<Scalar>(net, theta, x)(0);
  if (!net.has_ansatz()) return n;
  const AnsatzSpec& a = *net.spec().ansatz;
  if (is_registered(a.kind)) {
    Jet<Scalar> d, l;
    registered_jets<Scalar>(a.kind, a.params, x, d, l);
    return d.value * n + l.value;
  }
  const Vector xd = x.template cast<double>();
  return Scalar(a.distance(xd).value) * n + Scalar(a.lift(xd).value);
}

Vector forward_batch(const Network& net, const ParamVec& theta, const PointSet& x) {
  net.check(theta);
  if (net.spec().output_dim != 1) throw std::invalid_argument("forward: network has several outputs");
  if (x.rows() != net.input_dim())
    throw std::invalid_argument("forward: points have dimension " + std::to_string(x.rows()) + ", expected " +
                                std::to_string(net.input_dim()));
  // layer by layer over column blocks, so the affine maps run as matrix products
  constexpr Eigen::Index block = 512;
  const ParamLayout& lay = net.layout();
  const double* p = theta.values.data();
  Vector out(x.cols());
  std::vector<Eigen::MatrixXd> z(lay.layers.size() + 1);
  for (Eigen::Index c0 = 0; c0 < x.cols(); c0 += block) {
    const Eigen::Index nb = std::min(block, x.cols() - c0);
    z[0] = x.middleCols(c0, nb);
    for (std::size_t l = 0; l < lay.layers.size(); ++l) {
      const LayerLayout& L = lay.layers[l];
      const Eigen::Map<const Vector> b(p + L.b, L.out);
      Eigen::MatrixXd& h = z[l + 1];
      if (L.in == 0) {
        h = b.replicate(1, nb);
      } else {
        h.noalias() = Eigen::Map<const DenseMatrix>(p + L.w, L.out, L.in) * z[l];
        h.colwise() += b;
      }
      if (L.activated) {
        for (Eigen::Index i = 0; i < L.out; ++i) {
          const double pa = L.pa >= 0 ? p[L.pa + i] : 1.0, pb = L.pb >= 0 ? p[L.pb + i] : 0.0;
          for (Eigen::Index j = 0; j < nb; ++j) h(i, j) = activate<double>(L.act, h(i, j), pa, pb).s0;
        }
      }
      if (L.skip_from >= 0) h += z[L.skip_from];
    }
    out.segment(c0, nb) = z.back().row(0).transpose();
  }
  if (net.has_ansatz()) {
    const AnsatzSpec& a = *net.spec().ansatz;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (is_registered(a.kind)) {
        Jet<double> d, l;
        registered_jets<double>(a.kind, a.params, Vector(x.col(j)), d, l);
        out(j) = d.value * out(j) + l.value;
      } else {
        const Vector xj = x.col(j);
        out(j) = a.distance(xj).value * out(j) + a.lift(xj).value;
      }
    }
  }
  return out;
}

template VectorX<double> forward_raw<double>(const Network&, const ParamVec&, const VectorX<double>&);
template VectorX<long double> forward_raw<long double>(const Network&, const ParamVec&, const VectorX<long double>&);
template double forward<double>(const Network&, const ParamVec&, const VectorX<double>&);
template long double forward<long double>(const Network&, const ParamVec&, const VectorX<long double>&);

}  // namespace ned
