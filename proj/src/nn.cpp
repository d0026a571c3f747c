#include "rail/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace rail::nn {

namespace {

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Sigmoid: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
  }
  return z;
}

// Derivative expressed through the activation output y.
Eigen::MatrixXd activation_grad(Activation a, const Eigen::MatrixXd& y) {
  switch (a) {
    case Activation::Identity: return Eigen::MatrixXd::Ones(y.rows(), y.cols());
    case Activation::Tanh: return (1.0 - y.array().square()).matrix();
    case Activation::Sigmoid: return (y.array() * (1.0 - y.array())).matrix();
  }
  return y;
}

}  // namespace

std::size_t Mlp::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    count += weights[l].size();
    if (has_biases()) count += biases[l].size();
  }
  return count;
}

bool Mlp::all_finite() const {
  for (const auto& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

bool Mlp::same_shape(const Mlp& other) const {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols())
      return false;
  }
  for (std::size_t l = 0; l < biases.size(); ++l) {
    if (biases[l].size() != other.biases[l].size()) return false;
  }
  return true;
}

Mlp Mlp::zeros_like() const {
  Mlp z = *this;
  for (auto& w : z.weights) w.setZero();
  for (auto& b : z.biases) b.setZero();
  return z;
}

bool Mlp::operator==(const Mlp& other) const {
  if (hidden != other.hidden || output != other.output || !same_shape(other)) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l] != other.weights[l]) return false;
  }
  for (std::size_t l = 0; l < biases.size(); ++l) {
    if (biases[l] != other.biases[l]) return false;
  }
  return true;
}

Mlp make_mlp(const std::vector<int>& sizes, bool with_biases, Activation hidden, Activation output,
             std::mt19937_64& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output sizes");
  Mlp net;
  net.hidden = hidden;
  net.output = output;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    net.weights.push_back(std::move(w));
    if (with_biases) net.biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
  }
  return net;
}

Eigen::VectorXd flatten(const Mlp& net) {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(net.parameter_count()));
  Eigen::Index i = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const auto& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat[i++] = w(r, c);
    }
    if (net.has_biases()) {
      for (Eigen::Index r = 0; r < net.biases[l].size(); ++r) flat[i++] = net.biases[l][r];
    }
  }
  return flat;
}

void unflatten(Mlp& net, const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(net.parameter_count())) {
    throw std::invalid_argument("unflatten: parameter count mismatch");
  }
  Eigen::Index i = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    auto& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[i++];
    }
    if (net.has_biases()) {
      for (Eigen::Index r = 0; r < net.biases[l].size(); ++r) net.biases[l][r] = flat[i++];
    }
  }
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& x, Tape* tape) {
  if (x.rows() != net.input_dim()) throw std::invalid_argument("forward: input dimension mismatch");
  if (tape) {
    tape->acts.clear();
    tape->acts.push_back(x);
  }
  Eigen::MatrixXd a = x;
  const std::size_t last = net.layer_count() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    Eigen::MatrixXd z = net.weights[l] * a;
    if (net.has_biases()) z.colwise() += net.biases[l];
    a = activate(l == last ? net.output : net.hidden, z);
    if (tape) tape->acts.push_back(a);
  }
  return a;
}

Eigen::VectorXd forward_one(const Mlp& net, const Eigen::VectorXd& x) {
  return forward(net, x);
}

Mlp backward(const Mlp& net, const Tape& tape, const Eigen::MatrixXd& grad_output) {
  Mlp grad = net.zeros_like();
  const std::size_t layers = net.layer_count();
  Eigen::MatrixXd delta = grad_output;  // dL/d(post-activation) of the current layer
  for (std::size_t l = layers; l-- > 0;) {
    const Activation act = l == layers - 1 ? net.output : net.hidden;
    delta = (delta.array() * activation_grad(act, tape.acts[l + 1]).array()).matrix();
    grad.weights[l].noalias() = delta * tape.acts[l].transpose();
    if (net.has_biases()) grad.biases[l] = delta.rowwise().sum();
    if (l > 0) delta = net.weights[l].transpose() * delta;
  }
  return grad;
}

Adam::Adam(const Mlp& shape, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  const auto n = static_cast<Eigen::Index>(shape.parameter_count());
  m_ = Eigen::VectorXd::Zero(n);
  v_ = Eigen::VectorXd::Zero(n);
}

void Adam::step(Mlp& params, const Mlp& grad) {
  if (lr_ == 0.0) return;
  ++t_;
  const Eigen::VectorXd g = flatten(grad);
  m_ = beta1_ * m_ + (1.0 - beta1_) * g;
  v_ = beta2_ * v_ + (1.0 - beta2_) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  Eigen::VectorXd theta = flatten(params);
  theta.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  unflatten(params, theta);
}

}  // namespace rail::nn
