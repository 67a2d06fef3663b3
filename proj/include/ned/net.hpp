#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ned/activation.hpp"
#include "ned/linalg.hpp"

namespace ned {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Points are stored column-wise: a d x n matrix holds n points of R^d.
using PointSet = Eigen::MatrixXd;

/// Value, gradient and Hessian diagonal of a closed-form scalar field.
struct FieldJet {
  double value = 0.0;
  Vector grad;
  Vector hess_diag;
};

using Field = std::function<FieldJet(const Vector& x)>;

/// Boundary-conforming wrapper U = distance(x) * N(x) + lift(x).
/// `kind` and `params` identify registered closed forms so the ansatz can be
/// rebuilt from a checkpoint; hand-assembled ansätze use kind "custom".
struct AnsatzSpec {
  std::string kind;
  std::vector<double> params;
  Field distance;
  Field lift;
  std::function<double(const Vector&)> boundary;
};

/// (x - lo)(hi - x) N(x) + linear interpolation of (h_lo, h_hi).
AnsatzSpec interval_ansatz(double lo, double hi, double h_lo, double h_hi);

enum class BoxLift { half_norm_sq, one };

/// prod_i x_i(1 - x_i) N(x) + lift on [0,1]^d, where
/// lift = base(x) + sin(2 pi sum_i x_i) prod_i x_i(1 - x_i) if sine_bump,
/// base = ||x||^2 / 2 or 1, and boundary data h = base.
AnsatzSpec unit_box_ansatz(int dim, BoxLift base, bool sine_bump = true);

/// Rebuilds a registered ansatz from its (kind, params) descriptor.
AnsatzSpec make_ansatz(const std::string& kind, const std::vector<double>& params);

enum class Architecture { constant, fnn, resnet };

/// fnn:      input -> [dense + activation] * widths.size() -> affine output
/// resnet:   input -> linear embedding -> blocks of (dense, act, dense, act,
///           + identity skip) -> affine output
/// constant: a single trainable output bias, U(x) = theta
struct NetworkSpec {
  int input_dim = 1;
  Architecture arch = Architecture::fnn;
  std::vector<int> widths;
  std::vector<Activation> activations;
  int blocks = 0;
  int block_width = 0;
  Activation block_activation = Activation::relu3;
  int output_dim = 1;
  std::optional<AnsatzSpec> ansatz;

  static NetworkSpec fnn(int input_dim, std::vector<int> widths, Activation act);
  static NetworkSpec resnet(int input_dim, int blocks, int width, Activation act);
  static NetworkSpec constant(int input_dim = 1);

  /// Throws std::invalid_argument when widths/blocks are inconsistent.
  void validate() const;
  int depth() const;  ///< number of hidden (activated) layers
  int max_width() const;
};

struct LayerLayout {
  Eigen::Index in = 0, out = 0;
  bool activated = false;
  Activation act = Activation::relu;
  Eigen::Index w = 0, b = 0;       // offsets into the flat vector; w is row-major out x in
  Eigen::Index pa = -1, pb = -1;   // activation parameters, -1 if none
  int skip_from = -1;              // add the input of this layer after the activation
};

struct ParamBlock {
  std::string name;
  Eigen::Index offset = 0, rows = 0, cols = 0;
};

struct ParamLayout {
  int input_dim = 1;
  int output_dim = 1;
  std::vector<LayerLayout> layers;
  std::vector<ParamBlock> blocks;
  Eigen::Index size = 0;
};

ParamLayout make_layout(const NetworkSpec& spec);

struct ParamVec {
  Vector values;
  std::shared_ptr<const ParamLayout> layout;

  Eigen::Index size() const { return values.size(); }
  ParamVec with_values(Vector v) const { return {std::move(v), layout}; }
};

/// Per-layer view of a ParamVec, for inspection and hand construction.
struct LayerParams {
  Eigen::MatrixXd w;
  Vector b;
  Vector a;   ///< activation parameter a (empty if none)
  Vector bb;  ///< activation parameter b (empty if none)
};

class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return *layout_; }
  const std::shared_ptr<const ParamLayout>& layout_ptr() const { return layout_; }
  Eigen::Index num_params() const { return layout_->size; }
  int input_dim() const { return spec_.input_dim; }
  bool has_ansatz() const { return spec_.ansatz.has_value(); }

  ParamVec zeros() const { return {Vector::Zero(num_params()), layout_}; }
  void check(const ParamVec& theta) const;

 private:
  NetworkSpec spec_;
  std::shared_ptr<const ParamLayout> layout_;
};

std::vector<LayerParams> unflatten(const ParamVec& theta);
ParamVec flatten(const Network& net, const std::vector<LayerParams>& layers);

enum class InitMode {
  wide,  ///< U(-sqrt(fan_in), sqrt(fan_in))
  scaled          ///< U(-1/sqrt(fan_in), 1/sqrt(fan_in))
};

ParamVec init_params(const Network& net, std::uint64_t seed, InitMode mode = InitMode::scaled);

/// Raw network output N(x) (all outputs), evaluated in Scalar arithmetic.
template <typename Scalar>
VectorX<Scalar> forward_raw(const Network& net, const ParamVec& theta, const VectorX<Scalar>& x);

/// U(x; theta) = distance(x) N(x) + lift(x) with an ansatz, N(x) otherwise.
/// Single-output networks only.
template <typename Scalar>
Scalar forward(const Network& net, const ParamVec& theta, const VectorX<Scalar>& x);

inline double forward(const Network& net, const ParamVec& theta, const Vector& x) {
  return forward<double>(net, theta, x);
}

/// U at each column of X, in column order.
Vector forward_batch(const Network& net, const ParamVec& theta, const PointSet& x);

extern template VectorX<double> forward_raw<double>(const Network&, const ParamVec&, const VectorX<double>&);
extern template VectorX<long double> forward_raw<long double>(const Network&, const ParamVec&,
                                                              const VectorX<long double>&);
extern template double forward<double>(const Network&, const ParamVec&, const VectorX<double>&);
extern template long double forward<long double>(const Network&, const ParamVec&, const VectorX<long double>&);

}  // namespace ned
