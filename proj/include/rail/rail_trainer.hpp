#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rail/discriminator.hpp"
#include "rail/highway_env.hpp"
#include "rail/lidar.hpp"
#include "rail/policy.hpp"
#include "rail/trajectory.hpp"

namespace rail::trainer {

struct RailHyperparams {
  double alpha = 0.02;
  int directions = 16;  // N
  double nu = 0.03;
  int top_b = 16;       // directions kept in the update, <= N
  double gamma = 1.0;
  int rollout_horizon = 1000;
  std::uint64_t seed = 0;
  int iterations = 300;
  // A collision enters an absorbing state scored at the lower reward bound
  // for every remaining step of the horizon.
  bool absorbing_terminal = true;

  void validate() const;
  bool operator==(const RailHyperparams&) const = default;
};

struct RailSetup {
  env::EnvConfig env;
  lidar::SensorConfig sensor;
  disc::DiscConfig disc;
  RailHyperparams hp;
};

using policy::Direction;

struct IterationReport {
  int iteration = 0;
  std::vector<double> r_plus;
  std::vector<double> r_minus;
  double sigma_r = 0.0;
  bool update_skipped = false;
  double disc_loss = 0.0;
  double mean_score = 0.0;
  double mean_rollout_length = 0.0;
  double mean_speed = 0.0;  // m/s
  double lane_changes = 0.0;
  double overtakes = 0.0;
  double r_long = 0.0;
  double r_lat = 0.0;
  double collision_rate = 0.0;
};

// N directions shaped like the policy weights, entries i.i.d. N(0, 1).
std::vector<Direction> sample_directions(const RailHyperparams& hp, const policy::PolicyParams& shape,
                                         std::mt19937_64& rng);

struct RolloutResult {
  double score = 0.0;
  Trajectory trajectory;        // raw observations and actions
  Eigen::MatrixXd normalized;   // observations as the policy and discriminator saw them
  Eigen::VectorXd step_rewards;
  double terminal_penalty = 0.0;  // absorbing-state part of `score`
  env::EpisodeMetrics metrics;
};

// One episode with a frozen normalizer, scored by discounted discriminator rewards.
RolloutResult rollout(const policy::PolicyParams& params, const policy::NormalizerState& norm,
                      const disc::DiscriminatorParams& phi, std::uint64_t env_seed,
                      const RailSetup& setup);

struct UpdateOutcome {
  policy::PolicyParams theta;
  double sigma_r = 0.0;
  bool skipped = false;
};

// theta + alpha / (b sigma_R) * sum_k (r_plus_k - r_minus_k) delta_k over the
// top-b directions. Throws std::invalid_argument on length mismatch.
UpdateOutcome update_step(const policy::PolicyParams& theta, const std::vector<Direction>& directions,
                          std::span<const double> r_plus, std::span<const double> r_minus,
                          const RailHyperparams& hp);

struct TrainHooks {
  std::function<void(const IterationReport&)> on_iteration;
  // Called after the 2N rollouts of an iteration, with the normalizer they used.
  std::function<void(int, const policy::NormalizerState&, const std::vector<RolloutResult>&)>
      on_rollouts;
  // Called after every completed iteration with the current parameters.
  std::function<void(int, const policy::PolicyParams&, const policy::NormalizerState&,
                     const disc::DiscriminatorParams&)>
      on_checkpoint;
};

struct TrainResult {
  policy::PolicyParams policy;
  policy::NormalizerState norm;
  disc::DiscriminatorParams disc;
  std::vector<IterationReport> reports;
};

// Randomized adversarial imitation: directions, 2N rollouts, discriminator
// update, policy update, normalizer update. `init_disc` defaults to a seeded
// random discriminator. Throws NumericalAbort on non-finite parameters.
TrainResult train(const RailSetup& setup, const TrajectorySet& expert,
                  const policy::PolicyParams& init_policy, const policy::NormalizerState& init_norm,
                  const disc::DiscriminatorParams* init_disc = nullptr, const TrainHooks& hooks = {});

}  // namespace rail::trainer
