#include <doctest.h>

#include <cmath>

#include "ned/net.hpp"
#include "oracles.hpp"

using namespace ned;

TEST_CASE("fnn forward agrees with a straight-line evaluation") {
  Rng rng(1);
  for (Activation act : {Activation::relu, Activation::relu3, Activation::sigma2, Activation::relu_plus_sin}) {
    CAPTURE(to_string(act));
    const Network net(NetworkSpec::fnn(3, {5, 4}, act));
    ParamVec th = init_params(net, 2);
    // move the activation parameters off their defaults
    auto layers = unflatten(th);
    for (auto& l : layers)
      if (l.a.size()) {
        l.a = oracle::random_vector(rng, l.a.size());
        l.bb = oracle::random_vector(rng, l.bb.size());
      }
    th = flatten(net, layers);
    for (int k = 0; k < 10; ++k) {
      const Vector x = oracle::random_vector(rng, 3);
      CHECK(forward(net, th, x) == doctest::Approx(oracle::fnn_value(layers, net.spec().activations, x)).epsilon(1e-13));
    }
  }
}

TEST_CASE("resnet blocks add their input after the second activation") {
  const Network net(NetworkSpec::resnet(2, 2, 3, Activation::relu3));
  const ParamVec th = init_params(net, 4);
  const auto layers = unflatten(th);
  REQUIRE(layers.size() == 6);
  auto act = [](Vector h) {
    for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = std::pow(std::max(h(i), 0.0), 3);
    return h;
  };
  Vector x(2);
  x << 0.3, -0.8;
  Vector z = layers[0].w * x + layers[0].b;
  for (int b = 0; b < 2; ++b) {
    const Vector h = act(layers[1 + 2 * b].w * z + layers[1 + 2 * b].b);
    z = act(layers[2 + 2 * b].w * h + layers[2 + 2 * b].b) + z;
  }
  const double ref = (layers[5].w * z + layers[5].b)(0);
  CHECK(forward(net, th, x) == doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("parameter counts") {
  CHECK(Network(NetworkSpec::fnn(2, {50}, Activation::relu)).num_params() == 2 * 50 + 50 + 50 + 1);
  // sigma2 carries a and b per neuron
  CHECK(Network(NetworkSpec::fnn(1, {4}, Activation::sigma2)).num_params() == 4 + 4 + 8 + 4 + 1);
  CHECK(Network(NetworkSpec::constant()).num_params() == 1);
}

TEST_CASE("constant network returns its parameter everywhere") {
  const Network net(NetworkSpec::constant(3));
  ParamVec th = net.zeros();
  th.values(0) = -1.25;
  CHECK(forward(net, th, Vector::Random(3)) == -1.25);
}

TEST_CASE("init is seeded and scaled by fan-in") {
  const Network net(NetworkSpec::fnn(4, {16}, Activation::relu3));
  const ParamVec a = init_params(net, 9), b = init_params(net, 9), c = init_params(net, 10);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  const auto layers = unflatten(a);
  CHECK(layers[0].w.cwiseAbs().maxCoeff() <= 0.5);
  CHECK(layers[1].w.cwiseAbs().maxCoeff() <= 0.25);
  const auto wide = unflatten(init_params(net, 9, InitMode::wide));
  CHECK(wide[0].w.cwiseAbs().maxCoeff() > 0.5);
  CHECK(wide[0].w.cwiseAbs().maxCoeff() <= 2.0);
}

TEST_CASE("flatten inverts unflatten") {
  const Network net(NetworkSpec::fnn(2, {3, 3}, Activation::relu_plus_sin));
  const ParamVec th = init_params(net, 5);
  CHECK(flatten(net, unflatten(th)).values == th.values);
}

TEST_CASE("box ansatz matches the boundary data for any parameters") {
  NetworkSpec spec = NetworkSpec::fnn(3, {6}, Activation::relu3);
  spec.ansatz = unit_box_ansatz(3, BoxLift::half_norm_sq, true);
  const Network net(spec);
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const ParamVec th = init_params(net, static_cast<std::uint64_t>(k));
    Vector x = oracle::random_vector(rng, 3, 0.0, 1.0);
    x(k % 3) = (k % 2) ? 1.0 : 0.0;
    CHECK(forward(net, th, x) == doctest::Approx(0.5 * x.squaredNorm()).epsilon(1e-14));
  }
}

TEST_CASE("interval ansatz interpolates the end values") {
  NetworkSpec spec = NetworkSpec::resnet(1, 1, 4, Activation::relu3);
  spec.ansatz = interval_ansatz(-1.0, 0.0, 0.5, 1.0 / 3.0);
  const Network net(spec);
  const ParamVec th = init_params(net, 1);
  CHECK(forward(net, th, Vector::Constant(1, -1.0)) == doctest::Approx(0.5));
  CHECK(forward(net, th, Vector::Constant(1, 0.0)) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("forward_batch is columnwise forward") {
  const Network net(NetworkSpec::fnn(2, {7}, Activation::relu));
  const ParamVec th = init_params(net, 8);
  Rng rng(8);
  PointSet x(2, 9);
  for (Eigen::Index j = 0; j < 9; ++j) x.col(j) = oracle::random_vector(rng, 2);
  const Vector u = forward_batch(net, th, x);
  for (Eigen::Index j = 0; j < 9; ++j) CHECK(u(j) == forward(net, th, Vector(x.col(j))));
}

TEST_CASE("malformed specs and parameter vectors are rejected") {
  NetworkSpec s = NetworkSpec::fnn(2, {3}, Activation::relu);
  s.activations.clear();
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK_THROWS_AS(NetworkSpec::fnn(2, {0}, Activation::relu), std::invalid_argument);
  const Network net(NetworkSpec::fnn(2, {3}, Activation::relu));
  const Network other(NetworkSpec::fnn(2, {4}, Activation::relu));
  CHECK_THROWS(forward(net, init_params(other, 1), Vector::Zero(2)));
  CHECK_THROWS(forward(net, init_params(net, 1), Vector::Zero(3)));
}
