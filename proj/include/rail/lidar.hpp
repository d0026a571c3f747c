#pragma once

#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rail/highway_env.hpp"

namespace rail::lidar {

struct SensorConfig {
  int ray_count = 24;  // one ray per 15 degrees over a full circle
  double fov_min = 0.0;
  double fov_max = 2.0 * std::numbers::pi;
  double r_max = 100.0;
  bool include_ego_speed = true;
  bool include_lane_offset = true;

  void validate() const;
  double ray_angle(int k) const { return fov_min + k * (fov_max - fov_min) / ray_count; }
  int observation_dim() const {
    return 2 * ray_count + (include_ego_speed ? 1 : 0) + (include_lane_offset ? 1 : 0);
  }

  bool operator==(const SensorConfig&) const = default;
};

struct Observation {
  std::vector<double> distances;
  std::vector<double> rel_speeds;
  double ego_speed = 0.0;
  double lane_offset = 0.0;
  bool has_ego_speed = false;
  bool has_lane_offset = false;

  // [distances; rel_speeds; ego_speed?; lane_offset?]
  Eigen::VectorXd flatten() const;
};

// Distance from the origin along (dx, dy) to the first point of the
// axis-aligned box [x0,x1]x[y0,y1], or +inf when the ray misses it.
double ray_box_distance(double ox, double oy, double dx, double dy, double x0, double x1,
                        double y0, double y1);

std::vector<double> cast_rays(const env::VehicleState& ego,
                              std::span<const env::VehicleState> traffic,
                              const SensorConfig& cfg);

// Throws std::invalid_argument for dt <= 0 or mismatched lengths.
std::vector<double> relative_speeds(std::span<const double> dist_now,
                                    std::span<const double> dist_prev, double dt,
                                    double v_max, const SensorConfig& cfg);

Observation assemble(std::vector<double> dist, std::vector<double> rel,
                     const env::VehicleState& ego, const env::EnvConfig& env_cfg,
                     const SensorConfig& cfg);

// Stateful wrapper holding the previous tick's ranges for differencing.
class LidarSensor {
 public:
  LidarSensor(env::EnvConfig env_cfg, SensorConfig cfg);

  // First reading of an episode; relative speeds are zero.
  Observation reset(const env::WorldState& world);
  Observation observe(const env::WorldState& world);

  const SensorConfig& config() const { return cfg_; }

 private:
  env::EnvConfig env_cfg_;
  SensorConfig cfg_;
  std::vector<double> prev_;
};

}  // namespace rail::lidar
