#pragma once

#include <cstdint>
#include <vector>

#include "rail/action.hpp"
#include "rail/highway_env.hpp"
#include "rail/lidar.hpp"
#include "rail/trajectory.hpp"

namespace rail::expert {

struct ExpertConfig {
  double desired_speed = 27.0;  // m/s
  double time_headway = 1.2;    // s
  double min_gap = 8.0;         // m
  double lane_change_advantage = 2.0;  // m/s
  int cooldown = 30;                   // steps after a completed lane change
  double lookahead = 80.0;             // m, how far ahead a lane's speed is judged

  void validate(const env::EnvConfig& env_cfg) const;
  bool operator==(const ExpertConfig&) const = default;
};

// Rule-based driver with access to the full world state.
Action expert_act(const env::EnvConfig& env_cfg, const env::WorldState& world, const ExpertConfig& cfg);

// Deterministic per-episode seed derived from a run seed.
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode);

struct Recording {
  TrajectorySet demos;
  std::vector<env::EpisodeMetrics> audit;
};

// Throws std::invalid_argument when episodes < 1.
Recording record_demonstrations(const env::EnvConfig& env_cfg, const lidar::SensorConfig& sensor_cfg,
                                const ExpertConfig& expert_cfg, int episodes, std::uint64_t seed);

}  // namespace rail::expert
