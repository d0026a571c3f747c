#include "rail/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <variant>
#include <vector>

#include "rail/errors.hpp"

namespace rail {

namespace {

struct VariantField {
  policy::Variant* target;
};
struct OptimizerField {
  bc::Optimizer* target;
};

using FieldRef = std::variant<int*, double*, bool*, std::uint64_t*, VariantField,
                              OptimizerField>;

struct Binding {
  std::string key;
  FieldRef field;
};

std::vector<Binding> env_bindings(env::EnvConfig& e) {
  return {
      {"env.lane_count", &e.lane_count},
      {"env.lane_width", &e.lane_width},
      {"env.dt", &e.dt},
      {"env.v_min", &e.v_min},
      {"env.v_max", &e.v_max},
      {"env.vel_acc", &e.vel_acc},
      {"env.vel_dec", &e.vel_dec},
      {"env.lane_change_duration", &e.lane_change_duration},
      {"env.spawn_gap_min", &e.spawn_gap_min},
      {"env.traffic_density", &e.traffic_density},
      {"env.traffic_speed_min", &e.traffic_speed_min},
      {"env.traffic_speed_max", &e.traffic_speed_max},
      {"env.horizon", &e.horizon},
      {"env.sensing_window", &e.sensing_window},
      {"env.c_lat", &e.c_lat},
      {"env.safe_gap", &e.safe_gap},
      {"env.p_lc", &e.p_lc},
      {"env.lc_rear_time_gap", &e.lc_rear_time_gap},
      {"env.vehicle_length", &e.vehicle_length},
      {"env.vehicle_width", &e.vehicle_width},
  };
}

std::vector<Binding> sensor_bindings(lidar::SensorConfig& s) {
  return {
      {"sensor.ray_count", &s.ray_count},
      {"sensor.fov_min", &s.fov_min},
      {"sensor.fov_max", &s.fov_max},
      {"sensor.r_max", &s.r_max},
      {"sensor.include_ego_speed", &s.include_ego_speed},
      {"sensor.include_lane_offset", &s.include_lane_offset},
  };
}

std::vector<Binding> all_bindings(RunConfig& c) {
  std::vector<Binding> b = env_bindings(c.env);
  for (auto& s : sensor_bindings(c.sensor)) b.push_back(std::move(s));
  std::vector<Binding> rest = {
      {"disc.label_policy", &c.disc.label_policy},
      {"disc.label_expert", &c.disc.label_expert},
      {"disc.learning_rate", &c.disc.learning_rate},
      {"disc.epochs_per_iteration", &c.disc.epochs_per_iteration},
      {"disc.batch_size", &c.disc.batch_size},
      {"disc.replay_capacity", &c.disc.replay_capacity},
      {"disc.eps_d", &c.disc.eps_d},
      {"disc.hidden", &c.disc.hidden},
      {"disc.max_batches_per_epoch", &c.disc.max_batches_per_epoch},
      {"expert.desired_speed", &c.expert.desired_speed},
      {"expert.time_headway", &c.expert.time_headway},
      {"expert.min_gap", &c.expert.min_gap},
      {"expert.lane_change_advantage", &c.expert.lane_change_advantage},
      {"expert.cooldown", &c.expert.cooldown},
      {"expert.lookahead", &c.expert.lookahead},
      {"bc.learning_rate", &c.bc.learning_rate},
      {"bc.epochs", &c.bc.epochs},
      {"bc.batch_size", &c.bc.batch_size},
      {"bc.validation_fraction", &c.bc.validation_fraction},
      {"bc.seed", &c.bc.seed},
      {"bc.optimizer", OptimizerField{&c.bc.optimizer}},
      {"rail.alpha", &c.rail.alpha},
      {"rail.directions", &c.rail.directions},
      {"rail.nu", &c.rail.nu},
      {"rail.top_b", &c.rail.top_b},
      {"rail.gamma", &c.rail.gamma},
      {"rail.rollout_horizon", &c.rail.rollout_horizon},
      {"rail.seed", &c.rail.seed},
      {"rail.iterations", &c.rail.iterations},
      {"rail.absorbing_terminal", &c.rail.absorbing_terminal},
      {"policy.variant", VariantField{&c.variant}},
      {"policy.hidden", &c.hidden},
      {"eval.episodes", &c.eval_episodes},
      {"run.checkpoint_every", &c.checkpoint_every},
  };
  for (auto& r : rest) b.push_back(std::move(r));
  return b;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
  }
  return out;
}

void assign(const Binding& b, std::string_view value) {
  std::visit(
      [&](auto field) {
        using F = decltype(field);
        if constexpr (std::is_same_v<F, bool*>) {
          if (value == "true" || value == "1") {
            *field = true;
          } else if (value == "false" || value == "0") {
            *field = false;
          } else {
            throw ConfigError("bad boolean for " + b.key + ": '" + std::string(value) + "'");
          }
        } else if constexpr (std::is_same_v<F, VariantField>) {
          *field.target = policy::parse_variant(value);
        } else if constexpr (std::is_same_v<F, OptimizerField>) {
          if (value == "adam") {
            *field.target = bc::Optimizer::Adam;
          } else if (value == "sgd") {
            *field.target = bc::Optimizer::Sgd;
          } else {
            throw ConfigError("bad optimizer for " + b.key + ": '" + std::string(value) + "'");
          }
        } else {
          *field = parse_number<std::remove_pointer_t<F>>(b.key, value);
        }
      },
      b.field);
}

std::string format_value(const FieldRef& field) {
  return std::visit(
      [](auto f) -> std::string {
        using F = decltype(f);
        if constexpr (std::is_same_v<F, bool*>) {
          return *f ? "true" : "false";
        } else if constexpr (std::is_same_v<F, VariantField>) {
          return std::string(policy::variant_name(*f.target));
        } else if constexpr (std::is_same_v<F, OptimizerField>) {
          return *f.target == bc::Optimizer::Adam ? "adam" : "sgd";
        } else if constexpr (std::is_same_v<F, double*>) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.17g", *f);
          return buf;
        } else {
          return std::to_string(*f);
        }
      },
      field);
}

}  // namespace

void RunConfig::validate() const {
  env.validate();
  sensor.validate();
  disc.validate();
  expert.validate(env);
  bc.validate();
  rail.validate();
  if (hidden < 1) throw ConfigError("policy.hidden must be >= 1");
  if (eval_episodes < 1) throw ConfigError("eval.episodes must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("run.checkpoint_every must be >= 0");
}

RunConfig parse_config(std::string_view text, RunConfig cfg) {
  const auto bindings = all_bindings(cfg);
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = std::find_if(bindings.begin(), bindings.end(),
                                 [&](const Binding& b) { return b.key == key; });
    if (it == bindings.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
    assign(*it, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_config_text(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out;
  for (const auto& b : all_bindings(copy)) out += b.key + " = " + format_value(b.field) + "\n";
  return out;
}

std::uint64_t config_fingerprint(const env::EnvConfig& env_cfg, const lidar::SensorConfig& sensor_cfg) {
  env::EnvConfig e = env_cfg;
  lidar::SensorConfig s = sensor_cfg;
  std::string canon;
  for (const auto& b : env_bindings(e)) canon += b.key + "=" + format_value(b.field) + "\n";
  for (const auto& b : sensor_bindings(s)) canon += b.key + "=" + format_value(b.field) + "\n";
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace rail
