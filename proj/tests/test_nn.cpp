#include <doctest.h>

#include <cmath>
#include <random>

#include "rail/nn.hpp"
#include "support.hpp"

using namespace rail;
using rail::test::random_matrix;

namespace {

double act(nn::Activation a, double x) {
  switch (a) {
    case nn::Activation::Identity: return x;
    case nn::Activation::Tanh: return std::tanh(x);
    case nn::Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

// Scalar-loop forward pass for one column.
std::vector<double> loop_forward(const nn::Mlp& net, std::vector<double> x) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const auto& w = net.weights[l];
    std::vector<double> y(static_cast<std::size_t>(w.rows()), 0.0);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double acc = net.has_biases() ? net.biases[l][r] : 0.0;
      for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * x[static_cast<std::size_t>(c)];
      y[static_cast<std::size_t>(r)] = act(l + 1 == net.weights.size() ? net.output : net.hidden, acc);
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_CASE("make_mlp shapes and init range") {
  std::mt19937_64 rng(1);
  const auto net = nn::make_mlp({7, 5, 3}, true, nn::Activation::Tanh, nn::Activation::Sigmoid, rng);
  REQUIRE(net.layer_count() == 2);
  CHECK(net.weights[0].rows() == 5);
  CHECK(net.weights[0].cols() == 7);
  CHECK(net.weights[1].rows() == 3);
  CHECK(net.input_dim() == 7);
  CHECK(net.output_dim() == 3);
  CHECK(net.parameter_count() == 7 * 5 + 5 + 5 * 3 + 3);
  CHECK(net.weights[0].cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(7.0));
  CHECK(net.biases[1].isZero());
  CHECK(net.all_finite());
}

TEST_CASE("forward matches a scalar loop") {
  std::mt19937_64 rng(2);
  for (bool biases : {false, true}) {
    auto net = nn::make_mlp({6, 9, 4, 2}, biases, nn::Activation::Tanh, nn::Activation::Sigmoid, rng);
    if (biases)
      for (auto& b : net.biases) b = random_matrix(b.size(), 1, rng).col(0);
    const Eigen::MatrixXd x = random_matrix(6, 11, rng);
    const Eigen::MatrixXd y = nn::forward(net, x);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      std::vector<double> in(x.col(c).data(), x.col(c).data() + 6);
      const auto ref = loop_forward(net, in);
      for (Eigen::Index r = 0; r < 2; ++r) CHECK(std::abs(y(r, c) - ref[static_cast<std::size_t>(r)]) < 1e-12);
      CHECK(nn::forward_one(net, x.col(c)).isApprox(y.col(c), 1e-15));
    }
  }
}

TEST_CASE("flatten round trip") {
  std::mt19937_64 rng(3);
  auto net = nn::make_mlp({4, 3, 2}, true, nn::Activation::Tanh, nn::Activation::Identity, rng);
  const Eigen::VectorXd flat = nn::flatten(net);
  CHECK(flat.size() == static_cast<Eigen::Index>(net.parameter_count()));
  // weights row-major first
  CHECK(flat[1] == net.weights[0](0, 1));
  CHECK(flat[4] == net.weights[0](1, 0));
  auto other = net.zeros_like();
  CHECK(nn::flatten(other).isZero());
  nn::unflatten(other, flat);
  CHECK(other == net);
}

TEST_CASE("backward agrees with central finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(100 + seed);
    auto net = nn::make_mlp({5, 6, 4, 3}, seed % 2 == 0, nn::Activation::Tanh, nn::Activation::Sigmoid, rng);
    const Eigen::MatrixXd x = random_matrix(5, 7, rng);
    const Eigen::MatrixXd target = random_matrix(3, 7, rng);
    auto loss = [&](const nn::Mlp& m) { return 0.5 * (nn::forward(m, x) - target).squaredNorm(); };

    nn::Tape tape;
    const Eigen::MatrixXd y = nn::forward(net, x, &tape);
    const Eigen::VectorXd g = nn::flatten(nn::backward(net, tape, y - target));
    Eigen::VectorXd theta = nn::flatten(net);
    constexpr double h = 1e-5;
    int bad = 0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double keep = theta[i];
      theta[i] = keep + h;
      nn::unflatten(net, theta);
      const double up = loss(net);
      theta[i] = keep - h;
      nn::unflatten(net, theta);
      const double down = loss(net);
      theta[i] = keep;
      const double fd = (up - down) / (2 * h);
      if (std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}) >= 1e-4) ++bad;
    }
    nn::unflatten(net, theta);
    CHECK(bad == 0);
  }
}

TEST_CASE("Adam matches a hand-rolled reference") {
  std::mt19937_64 rng(4);
  auto net = nn::make_mlp({3, 2}, true, nn::Activation::Tanh, nn::Activation::Identity, rng);
  nn::Adam adam(net, 0.01);
  Eigen::VectorXd theta = nn::flatten(net);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size()), v = m;
  for (int t = 1; t <= 5; ++t) {
    auto grad = net.zeros_like();
    Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(theta.size(), -1.0, 1.0) * t;
    nn::unflatten(grad, g);
    adam.step(net, grad);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      theta[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK((nn::flatten(net) - theta).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Adam with zero learning rate leaves parameters alone") {
  std::mt19937_64 rng(5);
  auto net = nn::make_mlp({3, 4, 2}, true, nn::Activation::Tanh, nn::Activation::Identity, rng);
  const auto before = net;
  nn::Adam adam(net, 0.0);
  auto grad = net.zeros_like();
  nn::unflatten(grad, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(net.parameter_count())));
  adam.step(net, grad);
  CHECK(net == before);
}

TEST_CASE("shape helpers") {
  std::mt19937_64 rng(6);
  auto a = nn::make_mlp({3, 4, 2}, false, nn::Activation::Tanh, nn::Activation::Identity, rng);
  auto b = nn::make_mlp({3, 4, 2}, false, nn::Activation::Tanh, nn::Activation::Identity, rng);
  auto c = nn::make_mlp({3, 5, 2}, false, nn::Activation::Tanh, nn::Activation::Identity, rng);
  CHECK(a.same_shape(b));
  CHECK_FALSE(a.same_shape(c));
  CHECK_FALSE(a == b);
  a.weights[0](0, 0) = std::nan("");
  CHECK_FALSE(a.all_finite());
}
