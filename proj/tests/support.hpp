#pragma once

#include <cmath>
#include <random>

#include <Eigen/Core>

#include "rail/highway_env.hpp"

namespace rail::test {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                     double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = g(rng);
  return m;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale).col(0);
}

inline env::EnvConfig empty_road() {
  env::EnvConfig cfg;
  cfg.traffic_density = 0.0;
  return cfg;
}

inline env::VehicleState car(int id, double x, int lane, double v, const env::EnvConfig& cfg) {
  env::VehicleState s;
  s.id = id;
  s.x = x;
  s.lane = lane;
  s.settled_lane = lane;
  s.y = cfg.lane_center(lane);
  s.v = v;
  s.cruise_speed = v;
  s.length = cfg.vehicle_length;
  s.width = cfg.vehicle_width;
  return s;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace rail::test
