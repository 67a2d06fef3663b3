#include "ned/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ned/rng.hpp"

namespace ned {

Lin Lin::constant(double v) {
  Lin l;
  l.c0 = v;
  return l;
}

Lin Lin::var(int i, double coef) {
  Lin l;
  l.c[i] = coef;
  return l;
}

Lin operator+(Lin a, const Lin& b) {
  for (const auto& [i, v] : b.c) a.c[i] += v;
  a.c0 += b.c0;
  return a;
}

Lin operator*(double s, Lin a) {
  for (auto& kv : a.c) kv.second *= s;
  a.c0 *= s;
  return a;
}

Lin operator-(Lin a, const Lin& b) { return std::move(a) + (-1.0) * b; }
Lin operator+(Lin a, double s) {
  a.c0 += s;
  return a;
}
Lin operator-(Lin a, double s) {
  a.c0 -= s;
  return a;
}
Lin operator-(double s, const Lin& a) { return (-1.0) * a + s; }

double evaluate(const GadgetNet& g, const Vector& x) {
  if (!g.product_of_outputs) return forward(g.net, g.theta, x);
  return forward_raw<double>(g.net, g.theta, x).prod();
}

Vector evaluate_batch(const GadgetNet& g, const PointSet& x) {
  if (!g.product_of_outputs) return forward_batch(g.net, g.theta, x);
  Vector out(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) out(j) = forward_raw<double>(g.net, g.theta, Vector(x.col(j))).prod();
  return out;
}

// ---------------------------------------------------------------------------
// NetBuilder

NetBuilder::NetBuilder(int input_dim, Activation act) : input_dim_(input_dim), act_(act) {
  if (input_dim < 1) throw std::invalid_argument("NetBuilder: input_dim must be >= 1");
  if (act != Activation::relu && act != Activation::sigma2)
    throw std::invalid_argument("NetBuilder: relu or sigma2 networks only");
}

Lin NetBuilder::neuron(const Lin& h, double a, double b) {
  if (act_ == Activation::relu && (a != 1.0 || b != 0.0))
    throw std::invalid_argument("NetBuilder: relu neurons have no (a, b)");
  pending_.push_back({h, a, b});
  return Lin::var(static_cast<int>(pending_.size()) - 1);
}

void NetBuilder::commit() {
  if (pending_.empty()) throw std::logic_error("NetBuilder: empty layer");
  layers_.push_back(std::move(pending_));
  pending_.clear();
}

Lin NetBuilder::carry(const Lin& v) { return neuron(v) - neuron(-1.0 * v); }
Lin NetBuilder::carry_nonneg(const Lin& v) { return neuron(v); }
Lin NetBuilder::abs(const Lin& v) { return neuron(v) + neuron(-1.0 * v); }

Lin NetBuilder::square(const Lin& v) {
  if (act_ != Activation::sigma2) throw std::logic_error("NetBuilder: square needs sigma2");
  return neuron(v, 0.0, 1.0) + neuron(-1.0 * v, 0.0, 1.0);
}

Lin NetBuilder::product(const Lin& u, const Lin& v) {
  // uv = ((u + v)^2 - (u - v)^2) / 4
  return 0.25 * square(u + v) - 0.25 * square(u - v);
}

GadgetNet NetBuilder::finish(const std::vector<Lin>& outputs, std::string name) const {
  if (!pending_.empty()) throw std::logic_error("NetBuilder: uncommitted layer");
  if (outputs.empty()) throw std::invalid_argument("NetBuilder: no outputs");
  std::vector<int> widths;
  for (const auto& l : layers_) widths.push_back(static_cast<int>(l.size()));
  NetworkSpec spec = NetworkSpec::fnn(input_dim_, widths, act_);
  spec.output_dim = static_cast<int>(outputs.size());
  Network net(spec);

  auto fill = [](const Lin& l, Eigen::MatrixXd& w, Vector& b, Eigen::Index row) {
    for (const auto& [i, v] : l.c) {
      if (i < 0 || i >= w.cols()) throw std::logic_error("NetBuilder: Lin refers to a missing unit");
      w(row, i) = v;
    }
    b(row) = l.c0;
  };

  std::vector<LayerParams> params;
  Eigen::Index in = input_dim_;
  for (const auto& layer : layers_) {
    const auto out = static_cast<Eigen::Index>(layer.size());
    LayerParams lp;
    lp.w = Eigen::MatrixXd::Zero(out, in);
    lp.b = Vector::Zero(out);
    if (act_ == Activation::sigma2) {
      lp.a.resize(out);
      lp.bb.resize(out);
    }
    for (Eigen::Index r = 0; r < out; ++r) {
      fill(layer[r].h, lp.w, lp.b, r);
      if (act_ == Activation::sigma2) {
        lp.a(r) = layer[r].a;
        lp.bb(r) = layer[r].b;
      }
    }
    params.push_back(std::move(lp));
    in = out;
  }
  LayerParams lp;
  lp.w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(outputs.size()), in);
  lp.b = Vector::Zero(static_cast<Eigen::Index>(outputs.size()));
  for (std::size_t r = 0; r < outputs.size(); ++r) fill(outputs[r], lp.w, lp.b, static_cast<Eigen::Index>(r));
  params.push_back(std::move(lp));

  ParamVec theta = flatten(net, params);
  GadgetNet g{std::move(name), "", std::move(net), std::move(theta), 0, 0, "", 0.0, false};
  return g;
}

namespace {

int ceil_log2(int n) {
  int k = 0;
  while ((1 << k) < n) ++k;
  return k;
}

int floor_log2(int n) {
  int k = 0;
  while ((2 << k) <= n) ++k;
  return k;
}

std::string join(const std::vector<std::pair<std::string, double>>& kv) {
  std::ostringstream os;
  for (std::size_t i = 0; i < kv.size(); ++i) os << (i ? " " : "") << kv[i].first << "=" << kv[i].second;
  return os.str();
}

// One layer of the square construction. On [0,1] the triangle fold T and the
// interpolant I of q(u) = u(1 - u) on the grid j/B are both combinations of
// relu(t - j/B), j = 0..B-1; x^2 = x - sum_s B^{-2s} I(t_s) - B^{-2L} q(t_L).
struct SquareChain {
  int base;
  std::vector<double> fold, interp;  // coefficients on relu(t - j/B)
  Lin t, acc;
  double scale = 1.0;  // B^{-2s}

  SquareChain(int b, const Lin& x) : base(b), t(x), acc(x) {
    auto q = [](double u) { return u * (1.0 - u); };
    fold.resize(b);
    interp.resize(b);
    double prev_fold = 0.0, prev_interp = 0.0;
    for (int j = 0; j < b; ++j) {
      const double sf = (j % 2 == 0 ? 1.0 : -1.0) * b;
      const double si = (q((j + 1.0) / b) - q(static_cast<double>(j) / b)) * b;
      fold[j] = sf - prev_fold;
      interp[j] = si - prev_interp;
      prev_fold = sf;
      prev_interp = si;
    }
  }

  void step(NetBuilder& nb) {
    Lin t_next, i_val;
    for (int j = 0; j < base; ++j) {
      const Lin r = nb.neuron(t - static_cast<double>(j) / base);
      t_next = t_next + fold[j] * r;
      i_val = i_val + interp[j] * r;
    }
    acc = nb.carry_nonneg(acc) - scale * i_val;
    t = t_next;
    scale /= static_cast<double>(base) * base;
  }
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// relu gadgets

GadgetNet sigma1_square(int n, int l) {
  require(n >= 1 && l >= 1, "sigma1_square: N and L must be >= 1");
  NetBuilder nb(1, Activation::relu);
  SquareChain sq(3 * n - 1, nb.input(0));
  for (int s = 0; s < l; ++s) {
    sq.step(nb);
    nb.commit();
  }
  GadgetNet g = nb.finish({sq.acc}, "sigma1_square");
  g.params = join({{"N", n}, {"L", l}});
  g.width_budget = 3 * n;
  g.depth_budget = l;
  g.budget_rule = "width 3N, depth L";
  g.error_bound = std::pow(static_cast<double>(n), -l);
  return g;
}

GadgetNet sigma1_product(int n, int l, double a, double b) {
  require(n >= 1 && l >= 1, "sigma1_product: N and L must be >= 1");
  require(a < b, "sigma1_product: need a < b");
  NetBuilder nb(2, Activation::relu);
  const double h = b - a;
  const Lin xs = (1.0 / h) * nb.input(0) - a / h;
  const Lin ys = (1.0 / h) * nb.input(1) - a / h;
  // xs*ys = 2 z^2 - xs^2/2 - ys^2/2 with z = (xs + ys)/2 in [0, 1]
  SquareChain sx(3 * n - 1, xs), sy(3 * n - 1, ys), sz(3 * n - 1, 0.5 * (xs + ys));
  Lin lin = xs + ys;
  for (int s = 0; s < l; ++s) {
    sx.step(nb);
    sy.step(nb);
    sz.step(nb);
    lin = nb.carry_nonneg(lin);
    nb.commit();
  }
  const Lin prod = 2.0 * sz.acc - 0.5 * sx.acc - 0.5 * sy.acc;
  const Lin out = (h * h) * prod + (a * h) * lin + a * a;
  GadgetNet g = nb.finish({out}, "sigma1_product");
  g.params = join({{"N", n}, {"L", l}, {"a", a}, {"b", b}});
  g.width_budget = 9 * n + 1;
  g.depth_budget = l;
  g.budget_rule = "width 9N+1, depth L";
  g.error_bound = 6.0 * h * h * std::pow(static_cast<double>(n), -l);
  return g;
}

GadgetNet sigma1_min(int n) {
  require(n >= 2, "sigma1_min: n must be >= 2");
  NetBuilder nb(n, Activation::relu);
  std::vector<Lin> v;
  for (int i = 0; i < n; ++i) v.push_back(nb.input(i));
  while (v.size() > 1) {
    const Lin &x = v[0], &y = v[1];
    // min(x, y) = (x + y - |x - y|) / 2
    const Lin m = 0.5 * nb.carry(x + y) - 0.5 * nb.abs(x - y);
    std::vector<Lin> next{m};
    for (std::size_t i = 2; i < v.size(); ++i) next.push_back(nb.carry(v[i]));
    nb.commit();
    v = std::move(next);
  }
  GadgetNet g = nb.finish({v[0]}, "sigma1_min");
  g.params = join({{"n", n}});
  g.width_budget = 2 * n;
  g.depth_budget = n - 1;
  g.budget_rule = "width 2n, depth n-1";
  return g;
}

namespace {

GadgetNet identity_net(int d, Activation act, const char* name) {
  require(d >= 1, "identity: d must be >= 1");
  NetBuilder nb(d, act);
  std::vector<Lin> out;
  for (int i = 0; i < d; ++i) out.push_back(nb.carry(nb.input(i)));
  nb.commit();
  GadgetNet g = nb.finish(out, name);
  g.params = join({{"d", d}});
  g.width_budget = 2 * d;
  g.depth_budget = 1;
  g.budget_rule = "width 2d, depth 1";
  return g;
}

}  // namespace

GadgetNet sigma1_identity(int d) { return identity_net(d, Activation::relu, "sigma1_identity"); }
GadgetNet sigma2_identity(int d) { return identity_net(d, Activation::sigma2, "sigma2_identity"); }

double spike_value(const Vector& x) {
  double m = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    m = std::max(m, std::abs(x(k)));
    for (Eigen::Index s = 0; s < k; ++s) m = std::max(m, std::abs(x(k) - x(s)));
  }
  return std::max(0.0, 1.0 - m);
}

GadgetNet spike(int d) {
  require(d >= 1, "spike: d must be >= 1");
  // phi = relu(1 - M), M = max(max_k |x_k|, max_{k<s} |x_k - x_s|)
  NetBuilder nb(d, Activation::relu);
  Lin out;
  if (d == 1) {
    const Lin x = nb.input(0);
    out = nb.neuron(x + 1.0) - 2.0 * nb.neuron(x) + nb.neuron(x - 1.0);
    nb.commit();
  } else if (d == 2) {
    // max(|x1|, |x2|) = (|x1 + x2| + |x1 - x2|) / 2, so M = t + relu((s - t)/2)
    const Lin s = nb.abs(nb.input(0) + nb.input(1));
    const Lin t = nb.abs(nb.input(0) - nb.input(1));
    nb.commit();
    const Lin r = nb.neuron(0.5 * (s - t));
    const Lin tc = nb.carry_nonneg(t);
    nb.commit();
    out = nb.neuron(1.0 - tc - r);
    nb.commit();
  } else {
    const int budget = 12 + 2 * d;
    std::vector<Lin> raw;
    for (int k = 0; k < d; ++k) raw.push_back(nb.input(k));
    for (int k = 0; k < d; ++k)
      for (int s = k + 1; s < d; ++s) raw.push_back(nb.input(k) - nb.input(s));
    std::vector<Lin> x;
    for (int k = 0; k < d; ++k) x.push_back(nb.input(k));
    // raw terms are linear in x; they are stored relative to the input layer
    // and re-expressed through the carried copy of x each layer
    auto in_terms_of = [&](const Lin& r) {
      Lin o = Lin::constant(r.c0);
      for (const auto& [i, c] : r.c) o = o + c * x[i];
      return o;
    };
    std::vector<Lin> vals;
    std::size_t next_raw = 0;
    while (next_raw < raw.size() || vals.size() > 1) {
      const std::size_t left = raw.size() - next_raw;
      const int merge_cost = static_cast<int>(vals.size() / 2) * 2 + static_cast<int>(vals.size() % 2);
      std::size_t take;
      bool carry_x;
      if (merge_cost + 2 * static_cast<int>(left) <= budget) {
        take = left;
        carry_x = false;
      } else {
        take = static_cast<std::size_t>(std::max(0, (budget - 2 * d - merge_cost) / 2));
        carry_x = true;
        if (take == 0 && vals.size() <= 1) throw std::logic_error("spike: schedule stalled");
      }
      std::vector<Lin> next;
      for (std::size_t i = 0; i + 1 < vals.size(); i += 2) {
        // max(u, v) = u + relu(v - u), u >= 0
        next.push_back(nb.carry_nonneg(vals[i]) + nb.neuron(vals[i + 1] - vals[i]));
      }
      if (vals.size() % 2) next.push_back(nb.carry_nonneg(vals.back()));
      for (std::size_t i = 0; i < take; ++i) next.push_back(nb.abs(in_terms_of(raw[next_raw + i])));
      next_raw += take;
      std::vector<Lin> xn;
      if (carry_x)
        for (int k = 0; k < d; ++k) xn.push_back(nb.carry(x[k]));
      nb.commit();
      vals = std::move(next);
      x = std::move(xn);
    }
    out = nb.neuron(1.0 - vals[0]);
    nb.commit();
  }
  GadgetNet g = nb.finish({out}, "spike");
  g.params = join({{"d", d}});
  g.width_budget = 12 + 2 * d;
  g.depth_budget = d * d - d + 1;
  g.budget_rule = "width 12+2d, depth d^2-d+1";
  return g;
}

// ---------------------------------------------------------------------------
// partition of unity

double pu_psi(double t) {
  const double a = std::abs(t);
  if (a < 1.0) return 1.0;
  if (a > 2.0) return 0.0;
  return 2.0 - a;
}

double pu_value(const std::vector<int>& k, int big_k, const Vector& x) {
  double v = 1.0;
  for (std::size_t l = 0; l < k.size(); ++l)
    v *= pu_psi(3.0 * big_k * (x(static_cast<Eigen::Index>(l)) - static_cast<double>(k[l]) / big_k));
  return v;
}

std::vector<std::vector<int>> pu_indices(int d, int big_k) {
  std::vector<std::vector<int>> out;
  std::vector<int> k(d, 0);
  while (true) {
    out.push_back(k);
    int l = 0;
    while (l < d && ++k[l] > big_k) k[l++] = 0;
    if (l == d) break;
  }
  return out;
}

std::vector<GadgetNet> partition_of_unity(int d, int big_k, PuForm form) {
  require(d >= 1 && big_k >= 1, "partition_of_unity: d and K must be >= 1");
  std::vector<GadgetNet> out;
  for (const auto& k : pu_indices(d, big_k)) {
    NetBuilder nb(d, form == PuForm::factors ? Activation::relu : Activation::sigma2);
    std::vector<Lin> psi;
    for (int l = 0; l < d; ++l) {
      const Lin t = (3.0 * big_k) * nb.input(l) - 3.0 * k[l];
      // psi(t) = relu(t+2) - relu(t+1) - relu(t-1) + relu(t-2)
      psi.push_back(nb.neuron(t + 2.0) - nb.neuron(t + 1.0) - nb.neuron(t - 1.0) + nb.neuron(t - 2.0));
    }
    nb.commit();
    std::ostringstream ks;
    for (int l = 0; l < d; ++l) ks << (l ? "," : "") << k[l];
    GadgetNet g = [&] {
      if (form == PuForm::factors) {
        GadgetNet f = nb.finish(psi, "pu");
        f.product_of_outputs = true;
        f.width_budget = 6 * d;
        f.depth_budget = 1;
        f.budget_rule = "one hidden layer, width 6d";
        return f;
      }
      while (psi.size() > 1) {
        std::vector<Lin> next;
        for (std::size_t i = 0; i + 1 < psi.size(); i += 2) next.push_back(nb.product(psi[i], psi[i + 1]));
        if (psi.size() % 2) next.push_back(nb.carry_nonneg(psi.back()));
        nb.commit();
        psi = std::move(next);
      }
      GadgetNet f = nb.finish(psi, "pu_single");
      f.width_budget = std::max(4, 2 * d);
      f.depth_budget = ceil_log2(d) + 1;
      f.budget_rule = "width max{4,2d}, depth ceil(log2 d)+1";
      return f;
    }();
    g.params = "d=" + std::to_string(d) + " K=" + std::to_string(big_k) + " k=" + ks.str();
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// sigma2 gadgets

GadgetNet sigma2_square() {
  NetBuilder nb(1, Activation::sigma2);
  const Lin s = nb.square(nb.input(0));
  nb.commit();
  GadgetNet g = nb.finish({s}, "sigma2_square");
  g.width_budget = 2;
  g.depth_budget = 1;
  g.budget_rule = "width 2, depth 1";
  return g;
}

GadgetNet sigma2_product() {
  NetBuilder nb(2, Activation::sigma2);
  const Lin p = nb.product(nb.input(0), nb.input(1));
  nb.commit();
  GadgetNet g = nb.finish({p}, "sigma2_product");
  g.width_budget = 4;
  g.depth_budget = 1;
  g.budget_rule = "width 4, depth 1";
  return g;
}

namespace {

// A monomial computed in lanes: layer 1 multiplies two inputs per lane, each
// further layer absorbs one more factor, then the lanes are multiplied in a
// balanced tree. Lanes with one factor, or already complete, are carried.
class MonomialTask {
 public:
  MonomialTask(const std::vector<int>& alpha, int max_lanes) {
    for (std::size_t i = 0; i < alpha.size(); ++i)
      for (int r = 0; r < alpha[i]; ++r) factors_.push_back(static_cast<int>(i));
    const int k = degree();
    if (k < 2) return;
    int best_n = 1, best_depth = depth_for(k, 1);
    for (int n = 2; n <= std::min(max_lanes, k); ++n) {
      const int dep = depth_for(k, n);
      if (dep < best_depth) {
        best_depth = dep;
        best_n = n;
      }
    }
    lanes_.resize(best_n);
    std::size_t f = 0;
    for (int j = 0; j < best_n; ++j) {
      const int len = k / best_n + (j < k % best_n ? 1 : 0);
      for (int r = 0; r < len; ++r) lanes_[j].todo.push_back(factors_[f++]);
    }
    depth_ = best_depth;
  }

  int degree() const { return static_cast<int>(factors_.size()); }
  int depth() const { return depth_; }
  int lanes() const { return static_cast<int>(lanes_.size()); }
  bool done() const { return finished_; }
  const Lin& result() const { return result_; }

  /// Value of a monomial of degree <= 1 as a Lin over the current layer.
  Lin low_degree_value(const std::vector<Lin>& x) const {
    return degree() == 0 ? Lin::constant(1.0) : x[factors_[0]];
  }

  // Adds this task's neurons for one layer; x is the current copy of the input.
  void step(NetBuilder& nb, const std::vector<Lin>& x) {
    bool main_left = false;
    for (auto& l : lanes_) {
      if (!l.started) {
        l.started = true;
        if (l.todo.size() >= 2) {
          l.value = nb.product(x[l.todo[0]], x[l.todo[1]]);
          l.pos = 2;
        } else {
          l.value = nb.carry(x[l.todo[0]]);
          l.pos = 1;
        }
      } else if (l.pos < l.todo.size()) {
        l.value = nb.product(l.value, x[l.todo[l.pos++]]);
      } else if (!in_tree_) {
        l.value = nb.carry(l.value);
      }
      if (l.pos < l.todo.size()) main_left = true;
    }
    if (in_tree_) {
      std::vector<Lin> next;
      for (std::size_t i = 0; i + 1 < tree_.size(); i += 2) next.push_back(nb.product(tree_[i], tree_[i + 1]));
      if (tree_.size() % 2) next.push_back(nb.carry(tree_.back()));
      tree_ = std::move(next);
    }
    if (!in_tree_ && !main_left) {
      in_tree_ = true;
      for (auto& l : lanes_) tree_.push_back(l.value);
    }
    if (in_tree_ && tree_.size() == 1) {
      finished_ = true;
      result_ = tree_[0];
    }
  }

  /// True while a later step still multiplies in a factor of x.
  bool wants_x_next() const {
    if (in_tree_ || finished_) return false;
    for (const auto& l : lanes_) {
      if (!l.started) return true;
      if (l.pos < l.todo.size()) return true;
    }
    return false;
  }

 private:
  static int depth_for(int k, int n) {
    const int per_lane = (k + n - 1) / n;
    return std::max(1, per_lane - 1) + ceil_log2(n);
  }

  struct Lane {
    std::vector<int> todo;
    std::size_t pos = 0;
    bool started = false;
    Lin value;
  };
  std::vector<int> factors_;
  std::vector<Lane> lanes_;
  std::vector<Lin> tree_;
  bool in_tree_ = false;
  bool finished_ = false;
  int depth_ = 0;
  Lin result_;
};

struct PolyColumn {
  std::vector<std::pair<double, MonomialTask>> tasks;
};

// Runs columns of monomial tasks one after another with a carried copy of x
// and a carried running sum; returns the output Lin.
Lin run_columns(NetBuilder& nb, std::vector<PolyColumn> cols) {
  const int d = nb.input_dim();
  std::vector<Lin> x;
  for (int i = 0; i < d; ++i) x.push_back(nb.input(i));
  Lin sum;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    std::vector<std::pair<double, MonomialTask*>> active;
    for (auto& [coef, t] : cols[c].tasks) {
      if (t.degree() < 2) {
        sum = sum + coef * t.low_degree_value(x);
      } else {
        active.push_back({coef, &t});
      }
    }
    while (!active.empty()) {
      for (auto& [coef, t] : active) t->step(nb, x);
      bool later_x = false;
      for (auto& [coef, t] : active) later_x = later_x || t->wants_x_next();
      for (std::size_t c2 = c + 1; c2 < cols.size(); ++c2)
        for (auto& [coef, t] : cols[c2].tasks) later_x = later_x || t.degree() >= 1;
      std::vector<Lin> xn;
      if (later_x)
        for (int i = 0; i < d; ++i) xn.push_back(nb.carry(x[i]));
      const Lin sum_next = sum.c.empty() ? sum : nb.carry(sum);
      nb.commit();
      x = std::move(xn);
      sum = sum_next;
      std::vector<std::pair<double, MonomialTask*>> still;
      for (auto& [coef, t] : active) {
        if (t->done()) {
          sum = sum + coef * t->result();
        } else {
          still.push_back({coef, t});
        }
      }
      active = std::move(still);
    }
  }
  return sum;
}

std::string alpha_string(const std::vector<int>& alpha) {
  std::ostringstream os;
  for (std::size_t i = 0; i < alpha.size(); ++i) os << (i ? "," : "") << alpha[i];
  return os.str();
}

}  // namespace

GadgetNet sigma2_monomial(const std::vector<int>& alpha, int n, int l) {
  require(!alpha.empty(), "sigma2_monomial: empty multi-index");
  require(n >= 1 && l >= 1, "sigma2_monomial: N and L must be >= 1");
  int k = 0;
  for (int a : alpha) {
    require(a >= 0, "sigma2_monomial: negative exponent");
    k += a;
  }
  require(static_cast<long>(n) * l + (1L << floor_log2(n)) >= k,
          "sigma2_monomial: need N L + 2^floor(log2 N) >= |alpha|");
  const int d = static_cast<int>(alpha.size());
  NetBuilder nb(d, Activation::sigma2);
  std::vector<PolyColumn> cols(1);
  cols[0].tasks.emplace_back(1.0, MonomialTask(alpha, n));
  const Lin out = run_columns(nb, std::move(cols));
  GadgetNet g = nb.finish({out}, "sigma2_monomial");
  g.params = "alpha=" + alpha_string(alpha) + " N=" + std::to_string(n) + " L=" + std::to_string(l);
  g.width_budget = 4 * n + 2 * d;
  g.depth_budget = l + ceil_log2(n);
  g.budget_rule = "width 4N+2d, depth L+ceil(log2 N)";
  return g;
}

double polynomial_value(const std::vector<PolyTerm>& terms, const Vector& x) {
  double s = 0.0;
  for (const auto& t : terms) {
    double m = t.coeff;
    for (std::size_t i = 0; i < t.alpha.size(); ++i) m *= std::pow(x(static_cast<Eigen::Index>(i)), t.alpha[i]);
    s += m;
  }
  return s;
}

GadgetNet sigma2_polynomial(const std::vector<PolyTerm>& terms, int n, int l, int a, int b) {
  require(!terms.empty(), "sigma2_polynomial: no terms");
  require(n >= 1 && l >= 1 && a >= 1 && b >= 1, "sigma2_polynomial: N, L, a, b must be >= 1");
  const std::size_t d = terms[0].alpha.size();
  require(d >= 1, "sigma2_polynomial: empty multi-index");
  int max_deg = 0;
  for (const auto& t : terms) {
    require(t.alpha.size() == d, "sigma2_polynomial: multi-indices differ in length");
    max_deg = std::max(max_deg, std::accumulate(t.alpha.begin(), t.alpha.end(), 0));
  }
  require(static_cast<std::size_t>(a) * b >= terms.size(), "sigma2_polynomial: need a b >= J");
  require((l - 2.0 * b - b * std::log2(static_cast<double>(n))) * n >= static_cast<double>(b) * max_deg,
          "sigma2_polynomial: need (L - 2b - b log2 N) N >= b max|alpha|");
  NetBuilder nb(static_cast<int>(d), Activation::sigma2);
  std::vector<PolyColumn> cols(b);
  for (std::size_t j = 0; j < terms.size(); ++j)
    cols[j / a].tasks.emplace_back(terms[j].coeff, MonomialTask(terms[j].alpha, n));
  const Lin out = run_columns(nb, std::move(cols));
  GadgetNet g = nb.finish({out}, "sigma2_polynomial");
  g.params = "J=" + std::to_string(terms.size()) + " N=" + std::to_string(n) + " L=" + std::to_string(l) +
             " a=" + std::to_string(a) + " b=" + std::to_string(b);
  g.width_budget = 4 * n * a + 2 * static_cast<int>(d) + 2;
  g.depth_budget = l;
  g.budget_rule = "width 4Na+2d+2, depth L";
  return g;
}

// ---------------------------------------------------------------------------

GadgetReport verify_gadget(const GadgetNet& g, const std::function<double(const Vector&)>& oracle,
                           const PointSet& points) {
  GadgetReport r;
  r.name = g.name;
  r.params = g.params;
  r.width = g.width();
  r.depth = g.depth();
  r.width_budget = g.width_budget;
  r.depth_budget = g.depth_budget;
  r.budget_rule = g.budget_rule;
  r.budget_ok = g.within_budget();
  r.bound = g.error_bound;
  r.tolerance = g.error_bound > 0.0 ? g.error_bound : 1e-12;
  r.points = static_cast<int>(points.cols());
  const Vector v = evaluate_batch(g, points);
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const double o = oracle(Vector(points.col(j)));
    const double e = std::abs(v(j) - o);
    r.measured = std::max(r.measured, g.error_bound > 0.0 ? e : e / std::max(1.0, std::abs(o)));
  }
  r.error_ok = std::isfinite(r.measured) && r.measured <= r.tolerance;
  return r;
}

std::vector<std::string> gadget_names() {
  return {"sigma1_square", "sigma1_product", "sigma1_min",     "sigma1_identity", "spike",
          "pu",            "pu_single",      "sigma2_square", "sigma2_product",  "sigma2_monomial",
          "sigma2_identity"};
}

GadgetNet gadget_by_name(const std::string& name, const std::vector<double>& p) {
  auto need = [&](std::size_t k) {
    if (p.size() < k) throw std::invalid_argument("gadget " + name + ": expected " + std::to_string(k) + " parameters");
  };
  auto i = [&](std::size_t j) { return static_cast<int>(std::lround(p[j])); };
  if (name == "sigma1_square") return need(2), sigma1_square(i(0), i(1));
  if (name == "sigma1_product") return need(4), sigma1_product(i(0), i(1), p[2], p[3]);
  if (name == "sigma1_min") return need(1), sigma1_min(i(0));
  if (name == "sigma1_identity") return need(1), sigma1_identity(i(0));
  if (name == "sigma2_identity") return need(1), sigma2_identity(i(0));
  if (name == "spike") return need(1), spike(i(0));
  if (name == "sigma2_square") return sigma2_square();
  if (name == "sigma2_product") return sigma2_product();
  if (name == "pu" || name == "pu_single") {
    need(2);
    const int d = i(0), big_k = i(1);
    need(2 + static_cast<std::size_t>(d));
    std::vector<int> k(d);
    for (int l = 0; l < d; ++l) k[l] = i(2 + l);
    const auto all = pu_indices(d, big_k);
    const auto it = std::find(all.begin(), all.end(), k);
    if (it == all.end()) throw std::invalid_argument("gadget pu: index out of range");
    auto nets = partition_of_unity(d, big_k, name == "pu" ? PuForm::factors : PuForm::single_net);
    return std::move(nets[static_cast<std::size_t>(it - all.begin())]);
  }
  if (name == "sigma2_monomial") {
    need(3);
    std::vector<int> alpha;
    for (std::size_t j = 2; j < p.size(); ++j) alpha.push_back(i(j));
    return sigma2_monomial(alpha, i(0), i(1));
  }
  throw std::invalid_argument("unknown gadget '" + name + "'");
}

GadgetReport verify_by_name(const std::string& name, const std::vector<double>& params, int samples,
                            std::uint64_t seed) {
  const GadgetNet g = gadget_by_name(name, params);
  const int d = g.net.input_dim();
  Rng rng(derive_seed(seed, "verify_" + name));
  auto uniform = [&](double lo, double hi) {
    PointSet x(d, samples);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(lo, hi);
    return x;
  };
  if (name == "sigma1_square")
    return verify_gadget(g, [](const Vector& x) { return x(0) * x(0); }, Eigen::RowVectorXd::LinSpaced(10001, 0.0, 1.0));
  if (name == "sigma1_product") {
    constexpr int n = 1001;
    const double a = params[2], b = params[3];
    PointSet grid(2, n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        grid(0, i * n + j) = a + (b - a) * i / (n - 1);
        grid(1, i * n + j) = a + (b - a) * j / (n - 1);
      }
    return verify_gadget(g, [](const Vector& x) { return x(0) * x(1); }, grid);
  }
  if (name == "sigma1_identity" || name == "sigma2_identity") {
    // several outputs: score the largest deviation of any coordinate
    const PointSet x = uniform(-3.0, 3.0);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Vector out = forward_raw<double>(g.net, g.theta, Vector(x.col(j)));
      for (int l = 0; l < d; ++l) worst = std::max(worst, std::abs(out(l) - x(l, j)) / std::max(1.0, std::abs(x(l, j))));
    }
    GadgetReport r;
    r.name = g.name;
    r.params = g.params;
    r.width = g.width();
    r.depth = g.depth();
    r.width_budget = g.width_budget;
    r.depth_budget = g.depth_budget;
    r.budget_rule = g.budget_rule;
    r.budget_ok = g.within_budget();
    r.tolerance = 1e-12;
    r.points = samples;
    r.measured = worst;
    r.error_ok = worst <= r.tolerance;
    return r;
  }
  if (name == "sigma1_min") return verify_gadget(g, [](const Vector& x) { return x.minCoeff(); }, uniform(-2.0, 2.0));
  if (name == "spike") return verify_gadget(g, spike_value, uniform(-2.0, 2.0));
  if (name == "sigma2_square") return verify_gadget(g, [](const Vector& x) { return x(0) * x(0); }, uniform(-3.0, 3.0));
  if (name == "sigma2_product") return verify_gadget(g, [](const Vector& x) { return x(0) * x(1); }, uniform(-3.0, 3.0));
  if (name == "pu" || name == "pu_single") {
    const int big_k = static_cast<int>(std::lround(params[1]));
    std::vector<int> k(static_cast<std::size_t>(d));
    for (int l = 0; l < d; ++l) k[static_cast<std::size_t>(l)] = static_cast<int>(std::lround(params[2 + l]));
    return verify_gadget(g, [k, big_k](const Vector& x) { return pu_value(k, big_k, x); }, uniform(-0.25, 1.25));
  }
  if (name == "sigma2_monomial") {
    std::vector<int> alpha;
    for (std::size_t j = 2; j < params.size(); ++j) alpha.push_back(static_cast<int>(std::lround(params[j])));
    return verify_gadget(g,
                         [alpha](const Vector& x) {
                           double m = 1.0;
                           for (std::size_t i = 0; i < alpha.size(); ++i)
                             m *= std::pow(x(static_cast<Eigen::Index>(i)), alpha[i]);
                           return m;
                         },
                         uniform(-1.5, 1.5));
  }
  throw std::invalid_argument("verify_by_name: no oracle for '" + name + "'");
}

}  // namespace ned
