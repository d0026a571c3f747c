#include "rail/rail_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "rail/errors.hpp"
#include "rail/parallel.hpp"

namespace rail::trainer {

void RailHyperparams::validate() const {
  auto require = [](bool cond, const char* what) {
    if (!cond) throw ConfigError(std::string("invalid RAIL hyperparameters: ") + what);
  };
  require(alpha > 0.0, "alpha must be > 0");
  require(nu > 0.0, "nu must be > 0");
  require(directions >= 1, "directions must be >= 1");
  require(top_b >= 1 && top_b <= directions, "need 1 <= top_b <= directions");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
  require(rollout_horizon >= 1, "rollout_horizon must be >= 1");
  require(iterations >= 0, "iterations must be >= 0");
}

std::vector<Direction> sample_directions(const RailHyperparams& hp, const policy::PolicyParams& shape,
                                         std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Direction> dirs(static_cast<std::size_t>(hp.directions));
  for (auto& d : dirs) {
    for (const auto& w : shape.net.weights) {
      Eigen::MatrixXd m(w.rows(), w.cols());
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = gauss(rng);
      }
      d.push_back(std::move(m));
    }
  }
  return dirs;
}

RolloutResult rollout(const policy::PolicyParams& params, const policy::NormalizerState& norm,
                      const disc::DiscriminatorParams& phi, std::uint64_t env_seed,
                      const RailSetup& setup) {
  env::EnvConfig env_cfg = setup.env;
  env_cfg.horizon = setup.hp.rollout_horizon;
  lidar::LidarSensor sensor(env_cfg, setup.sensor);
  env::WorldState world = env::reset(env_cfg, env_seed);
  lidar::Observation obs = sensor.reset(world);

  const int n = params.input_dim();
  std::vector<Eigen::VectorXd> raw, normalized;
  RolloutResult out;
  while (!world.terminated) {
    Eigen::VectorXd s = obs.flatten();
    Eigen::VectorXd z = policy::normalize(s, norm);
    const Action a = policy::argmax_action(policy::forward(params, z));
    raw.push_back(std::move(s));
    normalized.push_back(std::move(z));
    out.trajectory.actions.push_back(a);
    auto [next, info] = env::step(env_cfg, std::move(world), a);
    world = std::move(next);
    out.metrics.add(info, world);
    if (!world.terminated) obs = sensor.observe(world);
  }
  out.trajectory.collided = world.collided;

  const auto steps = static_cast<Eigen::Index>(raw.size());
  out.trajectory.observations.resize(n, steps);
  out.normalized.resize(n, steps);
  std::vector<int> acts(raw.size());
  for (Eigen::Index t = 0; t < steps; ++t) {
    out.trajectory.observations.col(t) = raw[static_cast<std::size_t>(t)];
    out.normalized.col(t) = normalized[static_cast<std::size_t>(t)];
    acts[static_cast<std::size_t>(t)] = action_index(out.trajectory.actions[static_cast<std::size_t>(t)]);
  }
  out.step_rewards = disc::reward_batch(phi, disc::encode(out.normalized, acts, params.output_dim()), setup.disc);
  double discount = 1.0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    out.score += discount * out.step_rewards[t];
    discount *= setup.hp.gamma;
  }
  if (setup.hp.absorbing_terminal && world.collided) {
    const double floor = disc::reward_from_score(0.0, setup.disc.eps_d);
    for (int t = static_cast<int>(steps); t < env_cfg.horizon; ++t) {
      out.terminal_penalty += discount * floor;
      discount *= setup.hp.gamma;
    }
    out.score += out.terminal_penalty;
  }
  return out;
}

UpdateOutcome update_step(const policy::PolicyParams& theta, const std::vector<Direction>& directions,
                          std::span<const double> r_plus, std::span<const double> r_minus,
                          const RailHyperparams& hp) {
  const std::size_t n_dirs = directions.size();
  if (r_plus.size() != n_dirs || r_minus.size() != n_dirs) {
    throw std::invalid_argument("update_step: reward vectors must have one entry per direction");
  }
  if (n_dirs == 0) throw std::invalid_argument("update_step: no directions");

  std::vector<std::size_t> kept(n_dirs);
  std::iota(kept.begin(), kept.end(), 0);
  const auto b = static_cast<std::size_t>(std::clamp(hp.top_b, 1, static_cast<int>(n_dirs)));
  if (b < n_dirs) {
    std::stable_sort(kept.begin(), kept.end(), [&](std::size_t i, std::size_t j) {
      return std::max(r_plus[i], r_minus[i]) > std::max(r_plus[j], r_minus[j]);
    });
    kept.resize(b);
    std::sort(kept.begin(), kept.end());
  }

  double mean = 0.0;
  for (std::size_t k : kept) mean += r_plus[k] + r_minus[k];
  mean /= static_cast<double>(2 * b);
  double var = 0.0;
  for (std::size_t k : kept) {
    var += (r_plus[k] - mean) * (r_plus[k] - mean) + (r_minus[k] - mean) * (r_minus[k] - mean);
  }
  UpdateOutcome out{theta, std::sqrt(var / static_cast<double>(2 * b)), false};
  if (out.sigma_r < 1e-8) {
    out.skipped = true;
    return out;
  }

  Direction step = policy::zero_direction(theta);
  for (std::size_t k : kept) {
    const double diff = r_plus[k] - r_minus[k];
    for (std::size_t l = 0; l < step.size(); ++l) step[l] += diff * directions[k][l];
  }
  const double scale = hp.alpha / (static_cast<double>(b) * out.sigma_r);
  for (std::size_t l = 0; l < step.size(); ++l) out.theta.net.weights[l] += scale * step[l];
  return out;
}

TrainResult train(const RailSetup& setup, const TrajectorySet& expert,
                  const policy::PolicyParams& init_policy, const policy::NormalizerState& init_norm,
                  const disc::DiscriminatorParams* init_disc, const TrainHooks& hooks) {
  const RailHyperparams& hp = setup.hp;
  hp.validate();
  setup.disc.validate();
  setup.env.validate();
  if (expert.transition_count() == 0) throw std::invalid_argument("train: empty expert set");
  const int n = init_policy.input_dim();
  const int p = init_policy.output_dim();
  if (static_cast<int>(expert.n) != n || init_norm.dim() != n) {
    throw std::invalid_argument("train: expert, policy and normalizer dimensions disagree");
  }

  std::mt19937_64 rng(hp.seed);
  TrainResult result;
  result.policy = init_policy;
  result.norm = init_norm;
  if (init_disc) {
    result.disc = *init_disc;
  } else {
    std::mt19937_64 disc_rng(hp.seed ^ 0xD15C0000ULL);
    result.disc = disc::make_discriminator(n, p, setup.disc.hidden, disc_rng);
  }

  disc::TransitionBuffer expert_buffer(n, p, std::max<std::size_t>(expert.transition_count(), 1));
  expert_buffer.push_batch(expert.stacked_observations(), expert.stacked_actions());
  disc::TransitionBuffer policy_buffer(n, p, setup.disc.replay_capacity);
  disc::DiscriminatorTrainer disc_trainer(result.disc, setup.disc, hp.seed ^ 0xADA3ULL);

  const int threads = thread_count();
  const auto n_dirs = static_cast<std::size_t>(hp.directions);

  for (int it = 0; it < hp.iterations; ++it) {
    const std::vector<Direction> dirs = sample_directions(hp, result.policy, rng);
    std::vector<std::uint64_t> env_seeds(n_dirs);
    for (auto& s : env_seeds) s = rng();

    // Rollouts 2k and 2k+1 are the + and - perturbations of direction k on
    // the same traffic realization.
    std::vector<RolloutResult> rollouts(2 * n_dirs);
    const policy::PolicyParams& theta = result.policy;
    const policy::NormalizerState& frozen = result.norm;
    const disc::DiscriminatorParams& phi = result.disc;
    parallel_for(2 * n_dirs, threads, [&](std::size_t j) {
      const std::size_t k = j / 2;
      const int sign = j % 2 == 0 ? 1 : -1;
      rollouts[j] = rollout(policy::perturb(theta, dirs[k], hp.nu, sign), frozen, phi, env_seeds[k], setup);
    });
    if (hooks.on_rollouts) hooks.on_rollouts(it, result.norm, rollouts);

    IterationReport report;
    report.iteration = it;
    std::size_t fresh = 0;
    for (std::size_t j = 0; j < rollouts.size(); ++j) {
      const RolloutResult& r = rollouts[j];
      (j % 2 == 0 ? report.r_plus : report.r_minus).push_back(r.score);
      policy_buffer.push_batch(r.trajectory.observations, r.trajectory.actions);
      fresh += r.trajectory.actions.size();
      report.mean_score += r.score;
      report.mean_rollout_length += r.metrics.steps;
      report.mean_speed += r.metrics.mean_speed();
      report.lane_changes += r.metrics.lane_changes;
      report.overtakes += r.metrics.overtakes;
      report.r_long += r.metrics.r_long;
      report.r_lat += r.metrics.r_lat;
      report.collision_rate += r.metrics.collided ? 1.0 : 0.0;
    }
    const double count = static_cast<double>(rollouts.size());
    report.mean_score /= count;
    report.mean_rollout_length /= count;
    report.mean_speed /= count;
    report.lane_changes /= count;
    report.overtakes /= count;
    report.r_long /= count;
    report.r_lat /= count;
    report.collision_rate /= count;

    // Discriminator first, then the policy step with the rewards recorded
    // during the rollouts.
    report.disc_loss = disc_trainer.update(result.disc, expert_buffer, policy_buffer, &result.norm, fresh);

    UpdateOutcome upd = update_step(result.policy, dirs, report.r_plus, report.r_minus, hp);
    report.sigma_r = upd.sigma_r;
    report.update_skipped = upd.skipped;
    if (!upd.theta.net.all_finite()) {
      throw NumericalAbort("policy parameters became non-finite at iteration " + std::to_string(it));
    }
    result.policy = std::move(upd.theta);

    for (const RolloutResult& r : rollouts) {
      for (Eigen::Index c = 0; c < r.trajectory.observations.cols(); ++c) {
        policy::update_normalizer_inplace(result.norm, r.trajectory.observations.col(c));
      }
    }

    if (hooks.on_iteration) hooks.on_iteration(report);
    if (hooks.on_checkpoint) hooks.on_checkpoint(it, result.policy, result.norm, result.disc);
    result.reports.push_back(std::move(report));
  }
  return result;
}

}  // namespace rail::trainer
