#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace rail::nn {

enum class Activation { Identity, Tanh, Sigmoid };

// Dense feed-forward net acting on column vectors. Layer l maps
// weights[l].cols() inputs to weights[l].rows() outputs; hidden layers use
// `hidden`, the last layer uses `output`.
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;  // empty for bias-free nets
  Activation hidden = Activation::Tanh;
  Activation output = Activation::Identity;

  bool has_biases() const { return !biases.empty(); }
  std::size_t layer_count() const { return weights.size(); }
  Eigen::Index input_dim() const { return weights.front().cols(); }
  Eigen::Index output_dim() const { return weights.back().rows(); }
  std::size_t parameter_count() const;
  bool all_finite() const;
  bool same_shape(const Mlp& other) const;
  Mlp zeros_like() const;

  bool operator==(const Mlp& other) const;
};

// sizes = {in, h1, ..., out}. Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
Mlp make_mlp(const std::vector<int>& sizes, bool with_biases, Activation hidden, Activation output,
             std::mt19937_64& rng);

// Parameters in a fixed order: per layer, weights row-major then bias.
Eigen::VectorXd flatten(const Mlp& net);
void unflatten(Mlp& net, const Eigen::VectorXd& flat);

// Post-activation values per layer; acts[0] is the input batch.
struct Tape {
  std::vector<Eigen::MatrixXd> acts;
};

// X holds one sample per column.
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& x, Tape* tape = nullptr);
Eigen::VectorXd forward_one(const Mlp& net, const Eigen::VectorXd& x);

// Reverse-mode gradient of a scalar loss, given dLoss/dOutput (post-activation)
// for every sample column of the taped forward pass.
Mlp backward(const Mlp& net, const Tape& tape, const Eigen::MatrixXd& grad_output);

class Adam {
 public:
  Adam(const Mlp& shape, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);

  void step(Mlp& params, const Mlp& grad);
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

}  // namespace rail::nn
