#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "rail/action.hpp"
#include "rail/nn.hpp"
#include "rail/policy.hpp"

namespace rail::disc {

struct DiscConfig {
  double label_policy = 0.0;
  double label_expert = 1.0;
  double learning_rate = 1e-3;
  int epochs_per_iteration = 3;
  int batch_size = 128;
  std::size_t replay_capacity = 50'000;
  double eps_d = 1e-6;
  int hidden = 64;
  // Caps the minibatches of one epoch; 0 means no cap.
  int max_batches_per_epoch = 0;

  void validate() const;
  bool operator==(const DiscConfig&) const = default;
};

// D(s, a) in (0, 1): tanh MLP [n+p, h, h, 1] with a sigmoid output.
using DiscriminatorParams = nn::Mlp;

DiscriminatorParams make_discriminator(int n, int p, int hidden, std::mt19937_64& rng);
DiscriminatorParams make_zero_discriminator(int n, int p, int hidden);

// Concatenates [s; one_hot(a)] column-wise for a batch.
Eigen::MatrixXd encode(const Eigen::MatrixXd& states, const std::vector<int>& actions, int p);
Eigen::VectorXd encode_one(const Eigen::VectorXd& s, int action, int p);

double d_forward(const DiscriminatorParams& phi, const Eigen::VectorXd& s, int action);
Eigen::VectorXd d_forward_batch(const DiscriminatorParams& phi, const Eigen::MatrixXd& inputs);

// 1/2 E_expert[(D - b)^2] + 1/2 E_policy[(D - a)^2]. Inputs are encoded batches.
// Throws std::invalid_argument on an empty batch.
double ls_loss(const DiscriminatorParams& phi, const Eigen::MatrixXd& expert_inputs,
               const Eigen::MatrixXd& policy_inputs, const DiscConfig& cfg);

struct LossGrad {
  double loss = 0.0;
  nn::Mlp grad;
};

LossGrad d_backward(const DiscriminatorParams& phi, const Eigen::MatrixXd& expert_inputs,
                    const Eigen::MatrixXd& policy_inputs, const DiscConfig& cfg);

// log(d) - log(1 - d) with d clamped to [eps, 1 - eps].
double reward_from_score(double score, double eps_d);
double reward(const DiscriminatorParams& phi, const Eigen::VectorXd& s, int action,
              const DiscConfig& cfg);
Eigen::VectorXd reward_batch(const DiscriminatorParams& phi, const Eigen::MatrixXd& inputs,
                             const DiscConfig& cfg);

// Fixed-capacity ring of (observation, action) pairs; the oldest entries are
// overwritten once full.
class TransitionBuffer {
 public:
  TransitionBuffer(int n, int p, std::size_t capacity);

  void push(const Eigen::VectorXd& s, int action);
  void push_batch(const Eigen::MatrixXd& states, const std::vector<Action>& actions);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  int state_dim() const { return n_; }
  int action_dim() const { return p_; }

  // Uniform draws with replacement, encoded; states pass through `norm` when given.
  Eigen::MatrixXd sample(std::mt19937_64& rng, std::size_t count,
                         const policy::NormalizerState* norm) const;
  Eigen::MatrixXd all(const policy::NormalizerState* norm) const;

 private:
  int n_, p_;
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;
  Eigen::MatrixXd states_;
  std::vector<int> actions_;
};

// Adam state and minibatch RNG that persist across trainer iterations.
class DiscriminatorTrainer {
 public:
  DiscriminatorTrainer(const DiscriminatorParams& shape, const DiscConfig& cfg, std::uint64_t seed);

  // Runs epochs_per_iteration passes over `fresh_count` policy transitions
  // (defaults to the whole policy buffer). Returns the mean minibatch loss.
  // Throws std::invalid_argument when either buffer holds fewer than batch_size entries.
  double update(DiscriminatorParams& phi, const TransitionBuffer& expert,
                const TransitionBuffer& policy_buffer, const policy::NormalizerState* norm,
                std::size_t fresh_count = 0);

 private:
  DiscConfig cfg_;
  nn::Adam adam_;
  std::mt19937_64 rng_;
};

DiscriminatorParams d_update(DiscriminatorParams phi, const TransitionBuffer& expert,
                             const TransitionBuffer& policy_buffer, const DiscConfig& cfg,
                             std::uint64_t seed = 0);

}  // namespace rail::disc
