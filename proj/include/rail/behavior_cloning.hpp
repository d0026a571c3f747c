#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rail/nn.hpp"
#include "rail/policy.hpp"
#include "rail/trajectory.hpp"

namespace rail::bc {

enum class Optimizer { Adam, Sgd };

struct BcConfig {
  double learning_rate = 1e-3;
  int epochs = 50;
  int batch_size = 256;  // >= dataset size gives full-batch descent
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;

  void validate() const;
  bool operator==(const BcConfig&) const = default;
};

struct BcEpoch {
  int epoch = 0;
  double train_loss = 0.0;  // full training-set cross-entropy after the epoch
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
};

struct BcReport {
  std::vector<BcEpoch> epochs;
  std::vector<std::string> warnings;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  double initial_train_loss = 0.0;
  double final_validation_accuracy() const {
    return epochs.empty() ? 0.0 : epochs.back().validation_accuracy;
  }
};

struct BcResult {
  policy::PolicyParams params;
  policy::NormalizerState norm;
  BcReport report;
};

// Throws std::invalid_argument when the set holds no transitions.
policy::NormalizerState fit_normalizer(const TrajectorySet& expert);

// Mean softmax cross-entropy of the policy logits against action labels.
double cross_entropy(const policy::PolicyParams& params, const Eigen::MatrixXd& z,
                     const std::vector<int>& labels);
// Returns d(cross_entropy)/d(weights); `loss` receives the loss value when non-null.
nn::Mlp cross_entropy_grad(const policy::PolicyParams& params, const Eigen::MatrixXd& z,
                           const std::vector<int>& labels, double* loss = nullptr);

// Fits `init` to the expert transitions. The normalizer comes from
// fit_normalizer; the split into train/validation is seeded by cfg.seed.
// Throws std::invalid_argument when there are fewer than batch_size transitions.
BcResult train_bc(const TrajectorySet& expert, policy::PolicyParams init, const BcConfig& cfg);
// Same, starting from a seeded random initialization of the given shape.
BcResult train_bc(const TrajectorySet& expert, policy::Variant variant, int hidden,
                  const BcConfig& cfg);

// Fraction of transitions where the policy reproduces the recorded action.
// Throws std::invalid_argument on an empty dataset.
double action_match_accuracy(const policy::PolicyParams& params, const policy::NormalizerState& norm,
                             const Eigen::MatrixXd& observations, const std::vector<Action>& actions);

}  // namespace rail::bc
