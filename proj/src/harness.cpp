#include "rail/harness.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "rail/behavior_cloning.hpp"
#include "rail/checkpoint.hpp"
#include "rail/errors.hpp"
#include "rail/expert.hpp"
#include "rail/parallel.hpp"

namespace rail::harness {

MetricsReport aggregate(const std::vector<env::EpisodeMetrics>& episodes) {
  if (episodes.empty()) throw std::invalid_argument("aggregate: no episodes");
  MetricsReport r;
  r.episodes = static_cast<int>(episodes.size());
  for (const auto& m : episodes) {
    r.mean_speed += m.mean_speed();
    r.mean_lane_changes += m.lane_changes;
    r.mean_overtakes += m.overtakes;
    r.mean_longitudinal += m.r_long;
    r.mean_lateral += m.r_lat;
    r.collision_rate += m.collided ? 1.0 : 0.0;
  }
  const double k = r.episodes;
  r.mean_speed = r.mean_speed / k * kMpsToKmh;
  r.mean_lane_changes /= k;
  r.mean_overtakes /= k;
  r.mean_longitudinal /= k;
  r.mean_lateral /= k;
  r.collision_rate /= k;
  return r;
}

env::EpisodeMetrics run_episode(const env::EnvConfig& env_cfg, const lidar::SensorConfig& sensor_cfg,
                                const Controller& controller, std::uint64_t env_seed) {
  lidar::LidarSensor sensor(env_cfg, sensor_cfg);
  env::WorldState world = env::reset(env_cfg, env_seed);
  lidar::Observation obs = sensor.reset(world);
  env::EpisodeMetrics metrics;
  while (!world.terminated) {
    const Action a = controller(obs.flatten(), world);
    auto [next, info] = env::step(env_cfg, std::move(world), a);
    world = std::move(next);
    metrics.add(info, world);
    if (!world.terminated) obs = sensor.observe(world);
  }
  return metrics;
}

MetricsReport evaluate(const env::EnvConfig& env_cfg, const lidar::SensorConfig& sensor_cfg,
                       const Controller& controller, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  env_cfg.validate();
  sensor_cfg.validate();
  std::vector<env::EpisodeMetrics> results(static_cast<std::size_t>(episodes));
  parallel_for(results.size(), thread_count(), [&](std::size_t i) {
    results[i] = run_episode(env_cfg, sensor_cfg, controller, expert::episode_seed(seed, i));
  });
  return aggregate(results);
}

Controller policy_controller(const policy::PolicyParams& params, const policy::NormalizerState& norm) {
  return [params, norm](const Eigen::VectorXd& s, const env::WorldState&) {
    return policy::act(params, norm, s);
  };
}

Controller expert_controller(const env::EnvConfig& env_cfg, const expert::ExpertConfig& expert_cfg) {
  return [env_cfg, expert_cfg](const Eigen::VectorXd&, const env::WorldState& world) {
    return expert::expert_act(env_cfg, world, expert_cfg);
  };
}

MetricsReport evaluate_policy(const env::EnvConfig& env_cfg, const lidar::SensorConfig& sensor_cfg,
                              const policy::PolicyParams& params, const policy::NormalizerState& norm,
                              int episodes, std::uint64_t seed) {
  if (params.input_dim() != sensor_cfg.observation_dim()) {
    throw ConfigError("policy input dimension " + std::to_string(params.input_dim()) +
                      " does not match the sensor observation dimension " +
                      std::to_string(sensor_cfg.observation_dim()));
  }
  return evaluate(env_cfg, sensor_cfg, policy_controller(params, norm), episodes, seed);
}

MetricsReport evaluate_checkpoint(const std::filesystem::path& ckpt, const env::EnvConfig& env_cfg,
                                  const lidar::SensorConfig& sensor_cfg, int episodes, std::uint64_t seed) {
  const checkpoint::PolicyCheckpoint c = checkpoint::load_policy(ckpt);
  if (c.fingerprint != config_fingerprint(env_cfg, sensor_cfg)) {
    throw FingerprintMismatch("checkpoint " + ckpt.string() +
                              " was trained under a different env/sensor configuration");
  }
  return evaluate_policy(env_cfg, sensor_cfg, c.params, c.norm, episodes, seed);
}

MetricsReport evaluate_expert(const env::EnvConfig& env_cfg, const lidar::SensorConfig& sensor_cfg,
                              const expert::ExpertConfig& expert_cfg, int episodes, std::uint64_t seed) {
  return evaluate(env_cfg, sensor_cfg, expert_controller(env_cfg, expert_cfg), episodes, seed);
}

env::EpisodeMetrics write_replay(std::ostream& out, const env::EnvConfig& env_cfg,
                                 const lidar::SensorConfig& sensor_cfg, const Controller& controller,
                                 std::uint64_t env_seed) {
  lidar::LidarSensor sensor(env_cfg, sensor_cfg);
  env::WorldState world = env::reset(env_cfg, env_seed);
  lidar::Observation obs = sensor.reset(world);

  out << "tick,ego_x,ego_y,ego_v,action,r_long,r_lat,collided,lane_change,overtakes";
  for (std::size_t i = 0; i < world.traffic.size(); ++i) {
    out << ",v" << i << "_id,v" << i << "_x,v" << i << "_y,v" << i << "_v,v" << i << "_lane";
  }
  out << '\n' << std::setprecision(17);

  env::EpisodeMetrics metrics;
  while (!world.terminated) {
    const Action a = controller(obs.flatten(), world);
    const int tick = world.tick;
    auto [next, info] = env::step(env_cfg, std::move(world), a);
    world = std::move(next);
    metrics.add(info, world);
    out << tick << ',' << world.ego.x << ',' << world.ego.y << ',' << world.ego.v << ','
        << action_name(a) << ',' << info.r_long << ',' << info.r_lat << ',' << (info.collided ? 1 : 0) << ','
        << (info.lane_change_completed ? 1 : 0) << ',' << info.overtakes_delta;
    for (const env::VehicleState& v : world.traffic) {
      out << ',' << v.id << ',' << v.x << ',' << v.y << ',' << v.v << ',' << v.lane;
    }
    out << '\n';
    if (!world.terminated) obs = sensor.observe(world);
  }
  return metrics;
}

env::EpisodeMetrics write_replay_file(const std::filesystem::path& path, const env::EnvConfig& env_cfg,
                                      const lidar::SensorConfig& sensor_cfg, const Controller& controller,
                                      std::uint64_t env_seed) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open replay file for writing: " + path.string());
  env::EpisodeMetrics m = write_replay(out, env_cfg, sensor_cfg, controller, env_seed);
  out.flush();
  if (!out) throw IoError("failed writing replay file: " + path.string());
  return m;
}

env::EpisodeMetrics metrics_from_replay(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("replay dump is empty");
  env::EpisodeMetrics m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() < 10) throw IoError("malformed replay line: " + line);
    ++m.steps;
    m.speed_sum += std::stod(f[3]);
    m.r_long += std::stod(f[5]);
    m.r_lat += std::stod(f[6]);
    m.collided = m.collided || f[7] == "1";
    m.lane_changes += std::stoi(f[8]);
    m.overtakes += std::stoi(f[9]);
  }
  return m;
}

MetricsReport normalize_by(const MetricsReport& raw, const MetricsReport& reference) {
  auto ratio = [](double v, double ref) {
    if (ref != 0.0) return v / ref;
    return v == 0.0 ? 1.0 : v;
  };
  MetricsReport n = raw;
  n.mean_speed = ratio(raw.mean_speed, reference.mean_speed);
  n.mean_lane_changes = ratio(raw.mean_lane_changes, reference.mean_lane_changes);
  n.mean_overtakes = ratio(raw.mean_overtakes, reference.mean_overtakes);
  n.mean_longitudinal = ratio(raw.mean_longitudinal, reference.mean_longitudinal);
  n.mean_lateral = ratio(raw.mean_lateral, reference.mean_lateral);
  return n;
}

std::vector<SweepRow> sweep_demo_budget(const RunConfig& cfg, const SweepOptions& opts) {
  if (opts.budgets.empty()) throw std::invalid_argument("sweep: budgets must be nonempty");
  int max_budget = 0;
  for (int b : opts.budgets) {
    if (b < 1) throw std::invalid_argument("sweep: budgets must be >= 1");
    max_budget = std::max(max_budget, b);
  }
  auto log = [&](const std::string& s) {
    if (opts.log) opts.log(s);
  };

  const expert::Recording rec =
      expert::record_demonstrations(cfg.env, cfg.sensor, cfg.expert, max_budget, opts.seed);
  const std::uint64_t eval_seed = opts.seed ^ 0xE7A1ULL;
  const MetricsReport expert_report =
      evaluate_expert(cfg.env, cfg.sensor, cfg.expert, cfg.eval_episodes, eval_seed);

  std::vector<SweepRow> rows;
  for (int budget : opts.budgets) {
    const TrajectorySet demos = rec.demos.prefix(static_cast<std::size_t>(budget));
    rows.push_back({budget, opts.seed, "expert", expert_report, normalize_by(expert_report, expert_report)});

    bc::BcConfig bc_cfg = cfg.bc;
    bc_cfg.seed = opts.seed;
    const bc::BcResult bc_main = bc::train_bc(demos, cfg.variant, cfg.hidden, bc_cfg);
    const MetricsReport bc_report =
        evaluate_policy(cfg.env, cfg.sensor, bc_main.params, bc_main.norm, cfg.eval_episodes, eval_seed);
    rows.push_back({budget, opts.seed, "bc", bc_report, normalize_by(bc_report, expert_report)});
    log("budget " + std::to_string(budget) + " bc speed " + std::to_string(bc_report.mean_speed));

    for (policy::Variant v : {policy::Variant::Linear, policy::Variant::TwoLayer}) {
      const bc::BcResult init =
          v == cfg.variant ? bc_main : bc::train_bc(demos, v, cfg.hidden, bc_cfg);
      trainer::RailSetup setup = cfg.rail_setup();
      setup.hp.seed = opts.seed;
      trainer::TrainHooks hooks;
      hooks.on_iteration = [&](const trainer::IterationReport& r) {
        if ((r.iteration + 1) % 50 == 0) {
          log("budget " + std::to_string(budget) + " " + std::string(policy::variant_name(v)) + " iter " +
              std::to_string(r.iteration + 1) + " speed " + std::to_string(r.mean_speed * kMpsToKmh));
        }
      };
      const trainer::TrainResult tr = trainer::train(setup, demos, init.params, init.norm, nullptr, hooks);
      const MetricsReport rep =
          evaluate_policy(cfg.env, cfg.sensor, tr.policy, tr.norm, cfg.eval_episodes, eval_seed);
      rows.push_back({budget, opts.seed, "rail_" + std::string(policy::variant_name(v)), rep,
                      normalize_by(rep, expert_report)});
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "# normalized columns are divided by the expert's value at the same seed\n";
  out << "budget,seed,method,episodes,speed_kmh,lane_changes,overtakes,longitudinal,lateral,collision_rate,"
         "norm_speed,norm_lane_changes,norm_overtakes,norm_longitudinal,norm_lateral\n";
  out << std::setprecision(10);
  for (const SweepRow& r : rows) {
    out << r.budget << ',' << r.seed << ',' << r.method << ',' << r.raw.episodes << ',' << r.raw.mean_speed
        << ',' << r.raw.mean_lane_changes << ',' << r.raw.mean_overtakes << ',' << r.raw.mean_longitudinal
        << ',' << r.raw.mean_lateral << ',' << r.raw.collision_rate << ',' << r.normalized.mean_speed << ','
        << r.normalized.mean_lane_changes << ',' << r.normalized.mean_overtakes << ','
        << r.normalized.mean_longitudinal << ',' << r.normalized.mean_lateral << '\n';
  }
}

void write_training_header(std::ostream& out) {
  out << "iter,sigma_R,disc_loss,mean_score,mean_speed,lane_changes,overtakes,r_long,r_lat,collision_rate,"
         "skipped\n";
}

void write_training_row(std::ostream& out, const trainer::IterationReport& r) {
  out << std::setprecision(10) << r.iteration << ',' << r.sigma_r << ',' << r.disc_loss << ','
      << r.mean_score << ',' << r.mean_speed << ',' << r.lane_changes << ',' << r.overtakes << ','
      << r.r_long << ',' << r.r_lat << ',' << r.collision_rate << ',' << (r.update_skipped ? 1 : 0) << '\n';
}

void write_metrics_csv(std::ostream& out, const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  out << "name,episodes,speed_kmh,lane_changes,overtakes,longitudinal,lateral,collision_rate\n";
  out << std::setprecision(10);
  for (const auto& [name, r] : rows) {
    out << name << ',' << r.episodes << ',' << r.mean_speed << ',' << r.mean_lane_changes << ','
        << r.mean_overtakes << ',' << r.mean_longitudinal << ',' << r.mean_lateral << ','
        << r.collision_rate << '\n';
  }
}

}  // namespace rail::harness
