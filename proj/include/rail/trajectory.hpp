#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "rail/action.hpp"

namespace rail {

// One recorded episode: raw observations (one per column) and the action
// taken at each of them.
struct Trajectory {
  Eigen::MatrixXd observations;
  std::vector<Action> actions;
  bool collided = false;

  int steps() const { return static_cast<int>(actions.size()); }
  bool operator==(const Trajectory&) const = default;
};

struct TrajectorySet {
  std::uint32_t n = 0;
  std::uint32_t p = kActionCount;
  std::uint32_t ray_count = 0;
  std::uint64_t fingerprint = 0;
  std::vector<Trajectory> episodes;

  std::size_t transition_count() const;
  // Observations of every episode side by side, with their actions.
  Eigen::MatrixXd stacked_observations() const;
  std::vector<Action> stacked_actions() const;
  // The first `count` episodes.
  TrajectorySet prefix(std::size_t count) const;
};

inline constexpr std::uint32_t kTrajectoryFormatVersion = 1;

// Layout (all little-endian):
//   "RAILTRAJ" | u32 version | u32 n | u32 p | u32 K | u64 fingerprint | u32 episodes
//   per episode: u32 steps, then per step n x f64 observation + u8 action index
void write_trajectories(const std::filesystem::path& path, const TrajectorySet& set);
TrajectorySet read_trajectories(const std::filesystem::path& path);

// Appends episodes to an existing file (or creates it). Throws
// FingerprintMismatch when the stored header disagrees with `set`.
void append_trajectories(const std::filesystem::path& path, const TrajectorySet& set);

}  // namespace rail
