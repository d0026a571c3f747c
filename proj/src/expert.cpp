#include "rail/expert.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "rail/config.hpp"
#include "rail/errors.hpp"

namespace rail::expert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Neighbor {
  double gap = kInf;
  double speed = 0.0;
  bool present() const { return gap < kInf; }
};

Neighbor leader_in_lane(const env::WorldState& w, int lane) {
  Neighbor best;
  for (const auto& t : w.traffic) {
    if (t.x < w.ego.x || !env::occupies_lane(t, lane)) continue;
    const double gap = env::bumper_gap(w.ego, t);
    if (gap < best.gap) best = {gap, t.v};
  }
  return best;
}

Neighbor follower_in_lane(const env::WorldState& w, int lane) {
  Neighbor best;
  for (const auto& t : w.traffic) {
    if (t.x >= w.ego.x || !env::occupies_lane(t, lane)) continue;
    const double gap = env::bumper_gap(t, w.ego);
    if (gap < best.gap) best = {gap, t.v};
  }
  return best;
}

}  // namespace

void ExpertConfig::validate(const env::EnvConfig& env_cfg) const {
  if (desired_speed > env_cfg.v_max) throw ConfigError("expert desired_speed exceeds v_max");
  if (!(min_gap > 0.0)) throw ConfigError("expert min_gap must be > 0");
  if (time_headway < 0.0 || cooldown < 0 || lookahead <= 0.0) {
    throw ConfigError("invalid expert config");
  }
}

Action expert_act(const env::EnvConfig& env_cfg, const env::WorldState& w, const ExpertConfig& cfg) {
  const env::VehicleState& ego = w.ego;
  const double v = ego.v;

  Neighbor lead = leader_in_lane(w, ego.lane);
  if (ego.maneuvering()) {
    const Neighbor other = leader_in_lane(w, ego.target_lane());
    if (other.gap < lead.gap) lead = other;
  }
  const double safe = cfg.min_gap + cfg.time_headway * v;

  // (1) Too close to the leader.
  if (lead.gap < safe) return Action::Decelerate;

  // (2) Overtaking lane change.
  const bool cooled = w.tick - w.last_lane_change_tick >= cfg.cooldown;
  if (!ego.maneuvering() && cooled) {
    auto lane_speed = [&](const Neighbor& n) {
      return n.present() && n.gap < cfg.lookahead ? std::min(n.speed, cfg.desired_speed)
                                                  : cfg.desired_speed;
    };
    const double here = lane_speed(lead);
    double best_adv = -kInf;
    Action best = Action::Maintain;
    for (Action candidate : {Action::LaneLeft, Action::LaneRight}) {
      const int target = ego.lane + (candidate == Action::LaneLeft ? -1 : 1);
      if (target < 0 || target >= env_cfg.lane_count) continue;
      const Neighbor front = leader_in_lane(w, target);
      const Neighbor rear = follower_in_lane(w, target);
      const double adv = lane_speed(front) - here;
      const bool front_ok = front.gap >= safe + std::max(0.0, v - front.speed) * cfg.time_headway;
      const bool rear_ok =
          rear.gap >= cfg.min_gap + std::max(0.0, rear.speed - v) * cfg.time_headway;
      // Strict comparison keeps the left lane on ties.
      if (adv >= cfg.lane_change_advantage && front_ok && rear_ok && adv > best_adv) {
        best_adv = adv;
        best = candidate;
      }
    }
    if (best != Action::Maintain) return best;
  }

  // (3) Speed up when the gap stays comfortable at the higher speed.
  if (v < cfg.desired_speed) {
    const double v_next = std::min(v + env_cfg.vel_acc, env_cfg.v_max);
    const double closing = lead.present() ? std::max(0.0, v_next - lead.speed) : 0.0;
    if (lead.gap >= cfg.min_gap + cfg.time_headway * v_next + 2.0 * closing) {
      return Action::Accelerate;
    }
  }
  return Action::Maintain;
}

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode) {
  // splitmix64 over the pair
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + episode + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Recording record_demonstrations(const env::EnvConfig& env_cfg, const lidar::SensorConfig& sensor_cfg,
                                const ExpertConfig& expert_cfg, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("record_demonstrations: episodes must be >= 1");
  env_cfg.validate();
  expert_cfg.validate(env_cfg);

  Recording rec;
  rec.demos.n = static_cast<std::uint32_t>(sensor_cfg.observation_dim());
  rec.demos.p = kActionCount;
  rec.demos.ray_count = static_cast<std::uint32_t>(sensor_cfg.ray_count);
  rec.demos.fingerprint = config_fingerprint(env_cfg, sensor_cfg);

  lidar::LidarSensor sensor(env_cfg, sensor_cfg);
  for (int e = 0; e < episodes; ++e) {
    env::WorldState world = env::reset(env_cfg, episode_seed(seed, static_cast<std::uint64_t>(e)));
    lidar::Observation obs = sensor.reset(world);
    std::vector<Eigen::VectorXd> states;
    Trajectory traj;
    env::EpisodeMetrics metrics;
    while (!world.terminated) {
      const Action a = expert_act(env_cfg, world, expert_cfg);
      states.push_back(obs.flatten());
      traj.actions.push_back(a);
      auto [next, info] = env::step(env_cfg, std::move(world), a);
      world = std::move(next);
      metrics.add(info, world);
      if (!world.terminated) obs = sensor.observe(world);
    }
    traj.collided = world.collided;
    traj.observations.resize(rec.demos.n, static_cast<Eigen::Index>(states.size()));
    for (std::size_t s = 0; s < states.size(); ++s) {
      traj.observations.col(static_cast<Eigen::Index>(s)) = states[s];
    }
    rec.demos.episodes.push_back(std::move(traj));
    rec.audit.push_back(metrics);
  }
  return rec;
}

}  // namespace rail::expert
