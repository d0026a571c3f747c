#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "rail/action.hpp"
#include "rail/nn.hpp"

namespace rail::policy {

enum class Variant : std::uint32_t { Linear = 0, TwoLayer = 1 };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view s);

// Linear: one p x n matrix. Two-layer: input layer h x n, tanh, output
// layer p x h. No biases in either variant.
struct PolicyParams {
  Variant variant = Variant::TwoLayer;
  nn::Mlp net;

  int input_dim() const { return static_cast<int>(net.input_dim()); }
  int output_dim() const { return static_cast<int>(net.output_dim()); }
  int hidden_dim() const {
    return variant == Variant::TwoLayer ? static_cast<int>(net.weights[0].rows()) : 0;
  }

  bool operator==(const PolicyParams&) const = default;
};

PolicyParams make_zero_policy(Variant variant, int n, int h, int p = kActionCount);
PolicyParams make_random_policy(Variant variant, int n, int h, std::mt19937_64& rng,
                                int p = kActionCount);

// Parameter-space perturbation with one matrix per policy weight matrix.
using Direction = std::vector<Eigen::MatrixXd>;

// Welford running statistics over observations.
struct NormalizerState {
  std::int64_t count = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;
  double epsilon = 1e-8;

  int dim() const { return static_cast<int>(mean.size()); }
  Eigen::VectorXd variance() const;

  bool operator==(const NormalizerState&) const = default;
};

NormalizerState make_normalizer(int n, double epsilon = 1e-8);

// Throws std::invalid_argument on dimension mismatch.
Eigen::VectorXd normalize(const Eigen::VectorXd& s, const NormalizerState& norm);
// Column-wise version for a batch of observations.
Eigen::MatrixXd normalize_batch(const Eigen::MatrixXd& s, const NormalizerState& norm);

NormalizerState update_normalizer(NormalizerState norm, const Eigen::VectorXd& obs);
void update_normalizer_inplace(NormalizerState& norm, const Eigen::VectorXd& obs);

Eigen::VectorXd forward(const PolicyParams& params, const Eigen::VectorXd& z);

// argmax with ties going to the lowest action index.
Action argmax_action(const Eigen::VectorXd& logits);

Action act(const PolicyParams& params, const NormalizerState& norm, const Eigen::VectorXd& obs);

// theta + sign * nu * delta. Throws std::invalid_argument on shape mismatch.
PolicyParams perturb(const PolicyParams& params, const Direction& delta, double nu, int sign);

Direction zero_direction(const PolicyParams& params);

}  // namespace rail::policy
