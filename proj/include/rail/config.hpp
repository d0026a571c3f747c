#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "rail/behavior_cloning.hpp"
#include "rail/discriminator.hpp"
#include "rail/expert.hpp"
#include "rail/highway_env.hpp"
#include "rail/lidar.hpp"
#include "rail/policy.hpp"
#include "rail/rail_trainer.hpp"

namespace rail {

// Every tunable of a run. Loaded from a flat `section.key = value` file;
// '#' starts a comment.
struct RunConfig {
  env::EnvConfig env;
  lidar::SensorConfig sensor;
  disc::DiscConfig disc;
  expert::ExpertConfig expert;
  bc::BcConfig bc;
  trainer::RailHyperparams rail;
  policy::Variant variant = policy::Variant::TwoLayer;
  int hidden = 64;
  int eval_episodes = 16;
  int checkpoint_every = 50;  // iterations; 0 disables intermediate checkpoints

  void validate() const;
  trainer::RailSetup rail_setup() const { return {env, sensor, disc, rail}; }
};

// Applies the assignments in `text` on top of `base`. Throws ConfigError on
// unknown keys, malformed lines or values, and invariant violations.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

// Every key with its current value, in the file format.
std::string to_config_text(const RunConfig& cfg);

// 64-bit FNV-1a over the canonical text of the env and sensor settings.
std::uint64_t config_fingerprint(const env::EnvConfig& env_cfg, const lidar::SensorConfig& sensor_cfg);

}  // namespace rail
