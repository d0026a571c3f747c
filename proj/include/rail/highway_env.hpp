#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "rail/action.hpp"

namespace rail::env {

struct EnvConfig {
  int lane_count = 5;
  double lane_width = 4.0;             // m
  double dt = 0.1;                     // s per step
  double v_min = 0.0;                  // m/s
  double v_max = 30.0;                 // m/s
  double vel_acc = 1.0;                // m/s per Accelerate
  double vel_dec = 1.0;                // m/s per Decelerate
  int lane_change_duration = 20;       // steps
  double spawn_gap_min = 15.0;         // m, bumper to bumper
  double traffic_density = 1.0;        // vehicles per 100 m of carriageway
  double traffic_speed_min = 12.0;     // m/s
  double traffic_speed_max = 24.0;     // m/s
  int horizon = 1000;                  // steps per episode
  double sensing_window = 200.0;       // m ahead of and behind the ego
  double c_lat = 0.1;                  // lateral penalty per maneuver step
  double safe_gap = 10.0;              // m, traffic following / gap acceptance
  double p_lc = 0.002;                 // traffic lane-change probability per step
  double lc_rear_time_gap = 1.0;       // s of closing speed added to the rear gap check
  double vehicle_length = 4.5;
  double vehicle_width = 2.0;

  // Throws ConfigError when an invariant is violated.
  void validate() const;

  double lane_center(int lane) const { return (lane_count - lane - 0.5) * lane_width; }
  int traffic_count() const;

  bool operator==(const EnvConfig&) const = default;
};

enum class ManeuverKind : std::uint8_t { None = 0, Left = 1, Right = 2 };

struct VehicleState {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  int lane = 0;  // origin lane while a maneuver is active
  ManeuverKind maneuver = ManeuverKind::None;
  int maneuver_step = 0;  // completed steps of the active maneuver
  int settled_lane = 0;   // lane held before the current chain of maneuvers
  double length = 4.5;
  double width = 2.0;
  double cruise_speed = 0.0;  // traffic only
  int epoch = 0;              // incremented on every respawn

  bool maneuvering() const { return maneuver != ManeuverKind::None; }
  double progress(const EnvConfig& cfg) const {
    return static_cast<double>(maneuver_step) / cfg.lane_change_duration;
  }
  int target_lane() const;

  bool operator==(const VehicleState&) const = default;
};

struct WorldState {
  VehicleState ego;
  std::vector<VehicleState> traffic;
  int tick = 0;
  std::mt19937_64 rng;
  int overtake_count = 0;
  int lane_change_count = 0;
  int last_lane_change_tick = -1'000'000;  // tick of the ego's last completed lane change
  bool collided = false;
  bool terminated = false;

  bool operator==(const WorldState&) const = default;
};

struct StepInfo {
  double r_long = 0.0;
  double r_lat = 0.0;
  bool collided = false;
  int overtakes_delta = 0;
  bool lane_change_completed = false;
  bool terminated = false;
};

// Per-episode aggregate of StepInfo streams.
struct EpisodeMetrics {
  int steps = 0;
  double speed_sum = 0.0;  // m/s, summed over steps
  int lane_changes = 0;
  int overtakes = 0;
  double r_long = 0.0;
  double r_lat = 0.0;
  bool collided = false;

  void add(const StepInfo& info, const WorldState& after);
  double mean_speed() const { return steps > 0 ? speed_sum / steps : 0.0; }
};

WorldState reset(const EnvConfig& cfg, std::uint64_t seed);

// Throws std::logic_error when called on a terminated state.
std::pair<WorldState, StepInfo> step(const EnvConfig& cfg, WorldState state, Action action);

// Traffic decisions (lane changes, following speeds), traffic motion and
// respawning. The ego is treated as an obstacle but is not moved.
WorldState advance_traffic(const EnvConfig& cfg, WorldState state);

int count_overtake(const WorldState& prev, const WorldState& next);

// Axis-aligned rectangle overlap with positive area.
bool overlaps(const VehicleState& a, const VehicleState& b);

// Bumper-to-bumper longitudinal gap (negative when overlapping lengthwise).
double bumper_gap(const VehicleState& rear, const VehicleState& front);

// Lanes a vehicle blocks: its lane, plus the target lane during a maneuver.
bool occupies_lane(const VehicleState& v, int lane);

// Lane whose band contains y, clamped to the road.
int lane_at(const EnvConfig& cfg, double y);

}  // namespace rail::env
