#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "rail/config.hpp"
#include "rail/highway_env.hpp"
#include "rail/lidar.hpp"
#include "rail/policy.hpp"

namespace rail::harness {

// Evaluation aggregate. Speed is in km/h; everything else is per episode.
struct MetricsReport {
  int episodes = 0;
  double mean_speed = 0.0;
  double mean_lane_changes = 0.0;
  double mean_overtakes = 0.0;
  double mean_longitudinal = 0.0;
  double mean_lateral = 0.0;
  double collision_rate = 0.0;
};

inline constexpr double kMpsToKmh = 3.6;

// Episodes are folded in the given order. Throws std::invalid_argument when empty.
MetricsReport aggregate(const std::vector<env::EpisodeMetrics>& episodes);

// Any state -> action mapping with access to the sensor reading and world.
using Controller = std::function<Action(const Eigen::VectorXd& observation, const env::WorldState& world)>;

env::EpisodeMetrics run_episode(const env::EnvConfig& env_cfg, const lidar::SensorConfig& sensor_cfg,
                                const Controller& controller, std::uint64_t env_seed);

// `episodes` episodes seeded by expert::episode_seed(seed, i), run in
// parallel and reduced in episode order.
MetricsReport evaluate(const env::EnvConfig& env_cfg, const lidar::SensorConfig& sensor_cfg,
                       const Controller& controller, int episodes, std::uint64_t seed);

MetricsReport evaluate_policy(const env::EnvConfig& env_cfg, const lidar::SensorConfig& sensor_cfg,
                              const policy::PolicyParams& params, const policy::NormalizerState& norm,
                              int episodes, std::uint64_t seed);

// Loads a policy checkpoint and checks its fingerprint against the configs.
// Throws FingerprintMismatch on disagreement.
MetricsReport evaluate_checkpoint(const std::filesystem::path& ckpt, const env::EnvConfig& env_cfg,
                                  const lidar::SensorConfig& sensor_cfg, int episodes, std::uint64_t seed);

MetricsReport evaluate_expert(const env::EnvConfig& env_cfg, const lidar::SensorConfig& sensor_cfg,
                              const expert::ExpertConfig& expert_cfg, int episodes, std::uint64_t seed);

Controller policy_controller(const policy::PolicyParams& params, const policy::NormalizerState& norm);
Controller expert_controller(const env::EnvConfig& env_cfg, const expert::ExpertConfig& expert_cfg);

// Replay dump: header plus one CSV line per executed step.
//   tick,ego_x,ego_y,ego_v,action,r_long,r_lat,collided,lane_change,overtakes,
//   then per traffic vehicle i: v<i>_id,v<i>_x,v<i>_y,v<i>_v,v<i>_lane
// Positions are after the step; `tick` is the step index starting at 0.
env::EpisodeMetrics write_replay(std::ostream& out, const env::EnvConfig& env_cfg,
                                 const lidar::SensorConfig& sensor_cfg, const Controller& controller,
                                 std::uint64_t env_seed);
env::EpisodeMetrics write_replay_file(const std::filesystem::path& path, const env::EnvConfig& env_cfg,
                                      const lidar::SensorConfig& sensor_cfg, const Controller& controller,
                                      std::uint64_t env_seed);

// Re-accumulates per-episode metrics from a replay dump.
env::EpisodeMetrics metrics_from_replay(std::istream& in);

struct SweepRow {
  int budget = 0;
  std::uint64_t seed = 0;
  std::string method;  // expert, bc, rail_linear, rail_two_layer
  MetricsReport raw;
  MetricsReport normalized;  // raw divided by the expert's value; 1.0 when the expert's value is 0
};

// Per metric raw / reference. A zero reference maps to 1.0 when the value is
// also zero and to the raw value otherwise; episodes and collision rate are copied.
MetricsReport normalize_by(const MetricsReport& raw, const MetricsReport& reference);

struct SweepOptions {
  std::vector<int> budgets;
  std::uint64_t seed = 0;
  std::function<void(const std::string&)> log;
};

// For each budget: first `budget` episodes of one recording, BC, RAIL for both
// variants warm-started from BC, then evaluation. Rows per budget: expert,
// bc, rail_linear, rail_two_layer.
std::vector<SweepRow> sweep_demo_budget(const RunConfig& cfg, const SweepOptions& opts);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// iter,sigma_R,disc_loss,mean_score,mean_speed,lane_changes,overtakes,r_long,r_lat,collision_rate,skipped
void write_training_header(std::ostream& out);
void write_training_row(std::ostream& out, const trainer::IterationReport& r);

void write_metrics_csv(std::ostream& out, const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace rail::harness
