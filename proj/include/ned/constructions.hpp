// Explicit network constructions with width/depth accounting.
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ned/net.hpp"

namespace ned {

/// Affine form c0 + sum_i c_i v_i over the outputs of one layer.
struct Lin {
  std::map<int, double> c;
  double c0 = 0.0;

  static Lin constant(double v);
  static Lin var(int i, double coef = 1.0);
};

Lin operator+(Lin a, const Lin& b);
Lin operator-(Lin a, const Lin& b);
Lin operator*(double s, Lin a);
Lin operator+(Lin a, double s);
Lin operator-(Lin a, double s);
Lin operator-(double s, const Lin& a);

struct GadgetNet {
  std::string name;
  std::string params;
  Network net;
  ParamVec theta;
  int width_budget = 0;
  int depth_budget = 0;
  std::string budget_rule;       ///< the printed budget, e.g. "width 3N, depth L"
  double error_bound = 0.0;      ///< 0 for exact gadgets
  bool product_of_outputs = false;  ///< value is the product of the d outputs

  int width() const { return net.spec().max_width(); }
  int depth() const { return net.spec().depth(); }
  bool within_budget() const { return width() <= width_budget && depth() <= depth_budget; }
};

double evaluate(const GadgetNet& g, const Vector& x);
Vector evaluate_batch(const GadgetNet& g, const PointSet& x);

/// Layer-by-layer construction of relu or sigma2 networks. Every neuron is
/// an activation applied to a Lin over the current layer; a sigma2 neuron
/// a*relu(h) + b*h*relu(h) is relu for (1, 0) and relu^2 for (0, 1).
class NetBuilder {
 public:
  NetBuilder(int input_dim, Activation act);

  Lin input(int i) const { return Lin::var(i); }
  int input_dim() const { return input_dim_; }
  int depth() const { return static_cast<int>(layers_.size()); }
  int pending_width() const { return static_cast<int>(pending_.size()); }

  /// Adds a neuron to the layer under construction and returns it as a Lin
  /// over that layer (usable once the layer is committed).
  Lin neuron(const Lin& h, double a = 1.0, double b = 0.0);
  void commit();

  Lin carry(const Lin& v);         ///< relu(v) - relu(-v), 2 neurons
  Lin carry_nonneg(const Lin& v);  ///< relu(v) for v >= 0, 1 neuron
  Lin abs(const Lin& v);           ///< relu(v) + relu(-v), 2 neurons
  Lin square(const Lin& v);        ///< sigma2 only, 2 neurons
  Lin product(const Lin& u, const Lin& v);  ///< sigma2 only, 4 neurons

  GadgetNet finish(const std::vector<Lin>& outputs, std::string name) const;

 private:
  struct Neuron {
    Lin h;
    double a, b;
  };
  int input_dim_;
  Activation act_;
  std::vector<std::vector<Neuron>> layers_;
  std::vector<Neuron> pending_;
};

/// x^2 on [0, 1] within N^-L; width 3N, depth L.
GadgetNet sigma1_square(int n, int l);

/// xy on [a, b]^2 within 6 (b - a)^2 N^-L; width 9N + 1, depth L.
GadgetNet sigma1_product(int n, int l, double a, double b);

/// min(x_1, ..., x_n) exactly; width 2n, depth n - 1.
GadgetNet sigma1_min(int n);

/// Identity on R^d; one hidden layer of 2d neurons.
GadgetNet sigma1_identity(int d);
GadgetNet sigma2_identity(int d);

/// max{0, min(min_{k!=s}(1 + x_k - x_s), min_k(1 + x_k), min_k(1 - x_k))}
/// exactly; budget width 12 + 2d, depth d^2 - d + 1.
GadgetNet spike(int d);
double spike_value(const Vector& x);

enum class PuForm {
  factors,     ///< relu net with d outputs psi(3K(x_l - k_l/K)), value = their product
  single_net,  ///< sigma2 net with the product tree inside
};

/// psi(t) = 1 on |t| < 1, 2 - |t| on 1 <= |t| <= 2, 0 beyond.
double pu_psi(double t);
/// prod_l psi(3K(x_l - k_l / K)).
double pu_value(const std::vector<int>& k, int big_k, const Vector& x);

/// The (K+1)^d functions indexed by k in {0..K}^d, k_1 fastest.
std::vector<GadgetNet> partition_of_unity(int d, int big_k, PuForm form = PuForm::factors);
std::vector<std::vector<int>> pu_indices(int d, int big_k);

GadgetNet sigma2_square();
GadgetNet sigma2_product();

/// x^alpha exactly; requires N L + 2^floor(log2 N) >= |alpha|;
/// budget width 4N + 2d, depth L + ceil(log2 N).
GadgetNet sigma2_monomial(const std::vector<int>& alpha, int n, int l);

struct PolyTerm {
  double coeff;
  std::vector<int> alpha;
};

/// sum_j c_j x^alpha_j exactly; requires a b >= J and
/// (L - 2b - b log2 N) N >= b max_j |alpha_j|; budget width 4Na + 2d + 2, depth L.
GadgetNet sigma2_polynomial(const std::vector<PolyTerm>& terms, int n, int l, int a, int b);

double polynomial_value(const std::vector<PolyTerm>& terms, const Vector& x);

/// Measured sup error of a gadget against an oracle over the given points.
struct GadgetReport {
  std::string name;
  std::string params;
  int width = 0, depth = 0;
  int width_budget = 0, depth_budget = 0;
  std::string budget_rule;
  bool budget_ok = false;
  double bound = 0.0;       ///< declared error bound (0: exact)
  double measured = 0.0;    ///< max abs error (approximate) or max relative error (exact)
  double tolerance = 0.0;   ///< bound, or 1e-12 for exact gadgets
  int points = 0;
  bool error_ok = false;
  bool passed() const { return budget_ok && error_ok; }
};

GadgetReport verify_gadget(const GadgetNet& g, const std::function<double(const Vector&)>& oracle,
                           const PointSet& points);

/// Builds a gadget by name for the CLI: sigma1_square {N, L},
/// sigma1_product {N, L, a, b}, sigma1_min {n}, spike {d}, pu {d, K, k_1..k_d},
/// pu_single {d, K, k...}, sigma2_square, sigma2_product, sigma2_monomial
/// {N, L, alpha...}, identity {d}.
GadgetNet gadget_by_name(const std::string& name, const std::vector<double>& params);
std::vector<std::string> gadget_names();

/// Checks a gadget built by gadget_by_name against its closed form: an
/// equispaced grid for the sigma1 approximations (10^4 + 1 points on [0, 1]
/// for the square, 1001^2 on [a, b]^2 for the product), `samples` uniform
/// points otherwise. Identity gadgets compare every output.
GadgetReport verify_by_name(const std::string& name, const std::vector<double>& params, int samples = 100000,
                            std::uint64_t seed = 1);

}  // namespace ned
