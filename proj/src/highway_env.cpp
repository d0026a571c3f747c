#include "rail/highway_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rail/errors.hpp"

namespace rail::env {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

ManeuverKind opposite(ManeuverKind k) {
  if (k == ManeuverKind::Left) return ManeuverKind::Right;
  if (k == ManeuverKind::Right) return ManeuverKind::Left;
  return ManeuverKind::None;
}

int lane_delta(ManeuverKind k) {
  // Lane 0 is the leftmost lane.
  if (k == ManeuverKind::Left) return -1;
  if (k == ManeuverKind::Right) return 1;
  return 0;
}

bool share_lane(const VehicleState& a, const VehicleState& b) {
  return occupies_lane(b, a.lane) || (a.maneuvering() && occupies_lane(b, a.target_lane()));
}

void update_lateral(const EnvConfig& cfg, VehicleState& v) {
  const double base = cfg.lane_center(v.lane);
  if (!v.maneuvering()) {
    v.y = base;
    return;
  }
  // Left is +y.
  const double dir = v.maneuver == ManeuverKind::Left ? 1.0 : -1.0;
  v.y = base + dir * v.progress(cfg) * cfg.lane_width;
}

// Advances an active maneuver by one step. Returns true when it completes.
bool advance_maneuver(const EnvConfig& cfg, VehicleState& v) {
  if (!v.maneuvering()) return false;
  ++v.maneuver_step;
  if (v.maneuver_step >= cfg.lane_change_duration) {
    v.lane = v.target_lane();
    v.maneuver = ManeuverKind::None;
    v.maneuver_step = 0;
    update_lateral(cfg, v);
    return true;
  }
  update_lateral(cfg, v);
  return false;
}

// Gap acceptance against every vehicle blocking `lane`, excluding `self_index`.
bool spawn_slot_free(const EnvConfig& cfg, const WorldState& w, int lane, double x,
                     std::size_t self_index) {
  VehicleState probe;
  probe.x = x;
  probe.lane = lane;
  probe.length = cfg.vehicle_length;
  auto clear = [&](const VehicleState& o) {
    if (!occupies_lane(o, lane)) return true;
    const double gap = std::abs(o.x - x) - 0.5 * (o.length + probe.length);
    return gap >= cfg.spawn_gap_min;
  };
  if (!clear(w.ego)) return false;
  for (std::size_t j = 0; j < w.traffic.size(); ++j) {
    if (j == self_index) continue;
    if (!clear(w.traffic[j])) return false;
  }
  return true;
}

bool lane_change_gap_ok(const EnvConfig& cfg, const WorldState& w, std::size_t i, int target) {
  const VehicleState& self = w.traffic[i];
  auto ok = [&](const VehicleState& o) {
    if (!occupies_lane(o, target)) return true;
    if (o.x >= self.x) return bumper_gap(self, o) >= cfg.safe_gap;
    const double closing = std::max(0.0, o.v - self.v);
    return bumper_gap(o, self) >= cfg.safe_gap + closing * cfg.lc_rear_time_gap;
  };
  if (!ok(w.ego)) return false;
  for (std::size_t j = 0; j < w.traffic.size(); ++j) {
    if (j != i && !ok(w.traffic[j])) return false;
  }
  return true;
}

VehicleState make_traffic(const EnvConfig& cfg, Rng& rng, int id, int lane, double x) {
  VehicleState v;
  v.id = id;
  v.lane = lane;
  v.settled_lane = lane;
  v.x = x;
  v.length = cfg.vehicle_length;
  v.width = cfg.vehicle_width;
  v.cruise_speed = uniform(rng, cfg.traffic_speed_min, cfg.traffic_speed_max);
  v.v = v.cruise_speed;
  update_lateral(cfg, v);
  return v;
}

}  // namespace

void EnvConfig::validate() const {
  auto require = [](bool cond, const char* what) {
    if (!cond) throw ConfigError(std::string("invalid env config: ") + what);
  };
  require(lane_count >= 2, "lane_count must be >= 2");
  require(lane_width > 0.0, "lane_width must be > 0");
  require(dt > 0.0, "dt must be > 0");
  require(v_min >= 0.0 && v_min < v_max, "need 0 <= v_min < v_max");
  require(vel_acc > 0.0, "vel_acc must be > 0");
  require(vel_dec > 0.0, "vel_dec must be > 0");
  require(lane_change_duration >= 1, "lane_change_duration must be >= 1");
  require(vehicle_length > 0.0 && vehicle_width > 0.0, "vehicle dimensions must be > 0");
  require(vehicle_width < lane_width, "vehicle_width must be < lane_width");
  require(spawn_gap_min > vehicle_length, "spawn_gap_min must exceed vehicle length");
  require(traffic_density >= 0.0, "traffic_density must be >= 0");
  require(traffic_speed_min > 0.0 && traffic_speed_min <= traffic_speed_max,
          "need 0 < traffic_speed_min <= traffic_speed_max");
  require(horizon >= 1, "horizon must be >= 1");
  require(sensing_window > 0.0, "sensing_window must be > 0");
  require(c_lat >= 0.0, "c_lat must be >= 0");
  require(safe_gap > 0.0, "safe_gap must be > 0");
  require(p_lc >= 0.0 && p_lc <= 1.0, "p_lc must be in [0,1]");
  require(lc_rear_time_gap >= 0.0, "lc_rear_time_gap must be >= 0");
}

int EnvConfig::traffic_count() const {
  return static_cast<int>(std::lround(traffic_density * 2.0 * sensing_window / 100.0));
}

int VehicleState::target_lane() const { return lane + lane_delta(maneuver); }

bool occupies_lane(const VehicleState& v, int lane) {
  return v.lane == lane || (v.maneuvering() && v.target_lane() == lane);
}

int lane_at(const EnvConfig& cfg, double y) {
  const int lane = static_cast<int>(std::floor(cfg.lane_count - y / cfg.lane_width));
  return std::clamp(lane, 0, cfg.lane_count - 1);
}

bool overlaps(const VehicleState& a, const VehicleState& b) {
  return std::abs(a.x - b.x) < 0.5 * (a.length + b.length) &&
         std::abs(a.y - b.y) < 0.5 * (a.width + b.width);
}

double bumper_gap(const VehicleState& rear, const VehicleState& front) {
  return front.x - rear.x - 0.5 * (front.length + rear.length);
}

WorldState reset(const EnvConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  WorldState w;
  w.rng.seed(seed);

  VehicleState& ego = w.ego;
  ego.id = 0;
  ego.lane = cfg.lane_count / 2;
  ego.settled_lane = ego.lane;
  ego.x = 0.0;
  ego.v = 0.5 * (cfg.traffic_speed_min + cfg.traffic_speed_max);
  ego.length = cfg.vehicle_length;
  ego.width = cfg.vehicle_width;
  update_lateral(cfg, ego);

  const int count = cfg.traffic_count();
  constexpr int kMaxAttempts = 1000;
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const int lane = uniform_int(w.rng, 0, cfg.lane_count - 1);
      const double x = uniform(w.rng, -cfg.sensing_window, cfg.sensing_window);
      if (spawn_slot_free(cfg, w, lane, x, w.traffic.size())) {
        w.traffic.push_back(make_traffic(cfg, w.rng, i + 1, lane, x));
        break;
      }
    }
  }
  return w;
}

WorldState advance_traffic(const EnvConfig& cfg, WorldState w) {
  const std::size_t n = w.traffic.size();

  // Random lane changes, gated by the target-lane gap check.
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform(w.rng, 0.0, 1.0);
    VehicleState& v = w.traffic[i];
    if (v.maneuvering() || u >= cfg.p_lc) continue;
    const bool left_ok = v.lane > 0;
    const bool right_ok = v.lane < cfg.lane_count - 1;
    ManeuverKind dir = ManeuverKind::None;
    if (left_ok && right_ok) {
      dir = uniform_int(w.rng, 0, 1) == 0 ? ManeuverKind::Left : ManeuverKind::Right;
    } else {
      dir = left_ok ? ManeuverKind::Left : ManeuverKind::Right;
    }
    const int target = v.lane + lane_delta(dir);
    if (lane_change_gap_ok(cfg, w, i, target)) {
      v.maneuver = dir;
      v.maneuver_step = 0;
    }
  }

  // Following: leaders first so every follower sees its leader's new speed.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return w.traffic[a].x > w.traffic[b].x; });
  for (std::size_t i : order) {
    VehicleState& v = w.traffic[i];
    double best_gap = std::numeric_limits<double>::infinity();
    double leader_v = v.cruise_speed;
    auto consider = [&](const VehicleState& o) {
      if (o.x <= v.x || !share_lane(v, o)) return;
      const double gap = bumper_gap(v, o);
      if (gap < best_gap) {
        best_gap = gap;
        leader_v = o.v;
      }
    };
    consider(w.ego);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) consider(w.traffic[j]);
    }
    v.v = best_gap < cfg.safe_gap ? std::min(v.cruise_speed, leader_v) : v.cruise_speed;
  }

  for (VehicleState& v : w.traffic) {
    advance_maneuver(cfg, v);
    v.settled_lane = v.maneuvering() ? v.settled_lane : v.lane;
    v.x += v.v * cfg.dt;
  }

  // Keep the traffic population inside the window around the ego.
  for (std::size_t i = 0; i < n; ++i) {
    VehicleState& v = w.traffic[i];
    const bool behind = v.x < w.ego.x - cfg.sensing_window;
    const bool ahead = v.x > w.ego.x + cfg.sensing_window;
    if (!behind && !ahead) continue;
    constexpr int kRespawnAttempts = 20;
    for (int attempt = 0; attempt < kRespawnAttempts; ++attempt) {
      const int lane = uniform_int(w.rng, 0, cfg.lane_count - 1);
      const double offset = cfg.sensing_window - uniform(w.rng, 0.0, 20.0);
      const double x = behind ? w.ego.x + offset : w.ego.x - offset;
      if (spawn_slot_free(cfg, w, lane, x, i)) {
        const int epoch = v.epoch + 1;
        v = make_traffic(cfg, w.rng, v.id, lane, x);
        v.epoch = epoch;
        break;
      }
    }
  }
  return w;
}

std::pair<WorldState, StepInfo> step(const EnvConfig& cfg, WorldState w, Action action) {
  if (w.terminated) throw std::logic_error("step called on a terminated episode");
  const WorldState prev = w;
  StepInfo info;
  VehicleState& ego = w.ego;

  switch (action) {
    case Action::Accelerate: ego.v = std::min(ego.v + cfg.vel_acc, cfg.v_max); break;
    case Action::Decelerate: ego.v = std::max(ego.v - cfg.vel_dec, cfg.v_min); break;
    case Action::LaneLeft:
    case Action::LaneRight: {
      const ManeuverKind dir = action == Action::LaneLeft ? ManeuverKind::Left : ManeuverKind::Right;
      const int target = ego.lane + lane_delta(dir);
      if (!ego.maneuvering()) {
        if (target >= 0 && target < cfg.lane_count) {
          ego.maneuver = dir;
          ego.maneuver_step = 0;
        }
      } else if (ego.maneuver == opposite(dir)) {
        // Abort: head back, re-anchored on the lane being approached.
        ego.lane = ego.target_lane();
        ego.maneuver = dir;
        ego.maneuver_step = cfg.lane_change_duration - ego.maneuver_step;
      }
      break;
    }
    case Action::Maintain: break;
  }

  const bool maneuver_active = ego.maneuvering();
  if (advance_maneuver(cfg, ego)) {
    if (ego.lane != ego.settled_lane) {
      ++w.lane_change_count;
      w.last_lane_change_tick = w.tick + 1;
      info.lane_change_completed = true;
    }
    ego.settled_lane = ego.lane;
  }

  w = advance_traffic(cfg, std::move(w));
  w.ego.x += w.ego.v * cfg.dt;

  for (const VehicleState& t : w.traffic) {
    if (overlaps(w.ego, t)) {
      w.collided = true;
      break;
    }
  }

  info.overtakes_delta = count_overtake(prev, w);
  w.overtake_count += info.overtakes_delta;
  ++w.tick;
  w.terminated = w.collided || w.tick >= cfg.horizon;

  info.r_long = w.ego.v / cfg.v_max;
  info.r_lat = maneuver_active ? -cfg.c_lat : 0.0;
  info.collided = w.collided;
  info.terminated = w.terminated;
  return {std::move(w), info};
}

void EpisodeMetrics::add(const StepInfo& info, const WorldState& after) {
  ++steps;
  speed_sum += after.ego.v;
  lane_changes += info.lane_change_completed ? 1 : 0;
  overtakes += info.overtakes_delta;
  r_long += info.r_long;
  r_lat += info.r_lat;
  collided = collided || info.collided;
}

int count_overtake(const WorldState& prev, const WorldState& next) {
  int count = 0;
  for (const VehicleState& b : next.traffic) {
    auto it = std::find_if(prev.traffic.begin(), prev.traffic.end(),
                           [&](const VehicleState& a) { return a.id == b.id; });
    if (it == prev.traffic.end() || it->epoch != b.epoch) continue;
    if (it->x >= prev.ego.x && b.x < next.ego.x) ++count;
  }
  return count;
}

}  // namespace rail::env
