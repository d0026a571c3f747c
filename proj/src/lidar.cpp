#include "rail/lidar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rail/errors.hpp"

namespace rail::lidar {

void SensorConfig::validate() const {
  if (ray_count < 1) throw ConfigError("invalid sensor config: ray_count must be >= 1");
  if (!(r_max > 0.0)) throw ConfigError("invalid sensor config: r_max must be > 0");
  if (!(fov_max > fov_min)) throw ConfigError("invalid sensor config: need fov_min < fov_max");
}

Eigen::VectorXd Observation::flatten() const {
  const auto k = static_cast<Eigen::Index>(distances.size());
  Eigen::VectorXd s(2 * k + (has_ego_speed ? 1 : 0) + (has_lane_offset ? 1 : 0));
  for (Eigen::Index i = 0; i < k; ++i) {
    s[i] = distances[i];
    s[k + i] = rel_speeds[i];
  }
  Eigen::Index next = 2 * k;
  if (has_ego_speed) s[next++] = ego_speed;
  if (has_lane_offset) s[next++] = lane_offset;
  return s;
}

double ray_box_distance(double ox, double oy, double dx, double dy, double x0, double x1,
                        double y0, double y1) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double t_enter = -kInf;
  double t_exit = kInf;
  auto slab = [&](double o, double d, double lo, double hi) {
    if (d == 0.0) {
      if (o < lo || o > hi) t_exit = -kInf;
      return;
    }
    double a = (lo - o) / d;
    double b = (hi - o) / d;
    if (a > b) std::swap(a, b);
    t_enter = std::max(t_enter, a);
    t_exit = std::min(t_exit, b);
  };
  slab(ox, dx, x0, x1);
  slab(oy, dy, y0, y1);
  if (t_exit < t_enter || t_exit < 0.0) return kInf;
  return std::max(t_enter, 0.0);
}

std::vector<double> cast_rays(const env::VehicleState& ego,
                              std::span<const env::VehicleState> traffic,
                              const SensorConfig& cfg) {
  std::vector<double> out(cfg.ray_count, cfg.r_max);
  // Boxes that cannot be reached within r_max are skipped up front.
  const double reach = cfg.r_max + 0.5 * std::hypot(ego.length, ego.width) + 10.0;
  for (int k = 0; k < cfg.ray_count; ++k) {
    const double angle = cfg.ray_angle(k);
    const double dx = std::cos(angle);
    const double dy = std::sin(angle);
    double best = cfg.r_max;
    for (const env::VehicleState& t : traffic) {
      if (std::abs(t.x - ego.x) > reach) continue;
      const double hl = 0.5 * t.length;
      const double hw = 0.5 * t.width;
      const double d = ray_box_distance(ego.x, ego.y, dx, dy, t.x - hl, t.x + hl, t.y - hw, t.y + hw);
      best = std::min(best, d);
    }
    out[k] = best;
  }
  return out;
}

std::vector<double> relative_speeds(std::span<const double> dist_now,
                                    std::span<const double> dist_prev, double dt, double v_max,
                                    const SensorConfig& cfg) {
  if (!(dt > 0.0)) throw std::invalid_argument("relative_speeds: dt must be > 0");
  if (dist_now.size() != dist_prev.size()) {
    throw std::invalid_argument("relative_speeds: distance vectors differ in length");
  }
  const double limit = 2.0 * v_max;
  std::vector<double> rel(dist_now.size(), 0.0);
  for (std::size_t k = 0; k < dist_now.size(); ++k) {
    if (dist_now[k] < cfg.r_max && dist_prev[k] < cfg.r_max) {
      rel[k] = std::clamp((dist_now[k] - dist_prev[k]) / dt, -limit, limit);
    }
  }
  return rel;
}

Observation assemble(std::vector<double> dist, std::vector<double> rel,
                     const env::VehicleState& ego, const env::EnvConfig& env_cfg,
                     const SensorConfig& cfg) {
  Observation obs;
  obs.distances = std::move(dist);
  obs.rel_speeds = std::move(rel);
  obs.has_ego_speed = cfg.include_ego_speed;
  obs.has_lane_offset = cfg.include_lane_offset;
  if (cfg.include_ego_speed) obs.ego_speed = ego.v;
  if (cfg.include_lane_offset) {
    const int nearest = env::lane_at(env_cfg, ego.y);
    obs.lane_offset = (ego.y - env_cfg.lane_center(nearest)) / env_cfg.lane_width;
  }
  return obs;
}

LidarSensor::LidarSensor(env::EnvConfig env_cfg, SensorConfig cfg)
    : env_cfg_(std::move(env_cfg)), cfg_(std::move(cfg)) {
  cfg_.validate();
}

Observation LidarSensor::reset(const env::WorldState& world) {
  prev_ = cast_rays(world.ego, world.traffic, cfg_);
  return assemble(prev_, std::vector<double>(prev_.size(), 0.0), world.ego, env_cfg_, cfg_);
}

Observation LidarSensor::observe(const env::WorldState& world) {
  auto now = cast_rays(world.ego, world.traffic, cfg_);
  auto rel = relative_speeds(now, prev_, env_cfg_.dt, env_cfg_.v_max, cfg_);
  prev_ = now;
  return assemble(std::move(now), std::move(rel), world.ego, env_cfg_, cfg_);
}

}  // namespace rail::lidar
