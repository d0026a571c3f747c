#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rail/behavior_cloning.hpp"
#include "rail/checkpoint.hpp"
#include "rail/config.hpp"
#include "rail/errors.hpp"
#include "rail/expert.hpp"
#include "rail/harness.hpp"
#include "rail/rail_trainer.hpp"
#include "rail/trajectory.hpp"

namespace fs = std::filesystem;
using namespace rail;

namespace {

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string run_dir;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Config file (section.key = value)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Run seed");
  cmd->add_option("--run-dir", c.run_dir, "Output directory (default runs/<timestamp>_seed<seed>)");
}

RunConfig load(const Common& c) {
  return c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
}

fs::path make_run_dir(const Common& c) {
  fs::path dir = c.run_dir;
  if (dir.empty()) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&now, &tm);
    std::ostringstream name;
    name << std::put_time(&tm, "%Y%m%d-%H%M%S") << "_seed" << c.seed;
    dir = fs::path("runs") / name.str();
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void save_config(const fs::path& dir, const RunConfig& cfg) {
  auto out = open_out(dir / "config.txt");
  out << to_config_text(cfg);
}

void print_report(const std::string& name, const harness::MetricsReport& r) {
  std::cout << std::fixed << std::setprecision(3) << name << ": episodes " << r.episodes << ", speed "
            << r.mean_speed << " km/h, lane changes " << r.mean_lane_changes << ", overtakes "
            << r.mean_overtakes << ", longitudinal " << r.mean_longitudinal << ", lateral " << r.mean_lateral
            << ", collision rate " << r.collision_rate << '\n';
}

TrajectorySet load_demos(const std::string& path, const RunConfig& cfg) {
  TrajectorySet demos = read_trajectories(path);
  if (demos.fingerprint != config_fingerprint(cfg.env, cfg.sensor)) {
    throw FingerprintMismatch("demonstrations in " + path + " were recorded under a different env/sensor configuration");
  }
  return demos;
}

checkpoint::PolicyCheckpoint load_checked_policy(const std::string& path, const RunConfig& cfg) {
  checkpoint::PolicyCheckpoint c = checkpoint::load_policy(path);
  if (c.fingerprint != config_fingerprint(cfg.env, cfg.sensor)) {
    throw FingerprintMismatch("checkpoint " + path + " was trained under a different env/sensor configuration");
  }
  return c;
}

void write_bc_report(const fs::path& path, const bc::BcReport& rep) {
  auto out = open_out(path);
  out << "epoch,train_loss,train_accuracy,validation_accuracy\n" << std::setprecision(10);
  for (const auto& e : rep.epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.train_accuracy << ',' << e.validation_accuracy << '\n';
  }
}

int run_record(const Common& c, int episodes) {
  RunConfig cfg = load(c);
  const fs::path dir = make_run_dir(c);
  save_config(dir, cfg);
  const expert::Recording rec = expert::record_demonstrations(cfg.env, cfg.sensor, cfg.expert, episodes, c.seed);
  write_trajectories(dir / "demos.bin", rec.demos);
  const harness::MetricsReport audit = harness::aggregate(rec.audit);
  auto out = open_out(dir / "expert_audit.csv");
  harness::write_metrics_csv(out, {{"expert", audit}});
  print_report("expert", audit);
  std::cout << "wrote " << rec.demos.transition_count() << " transitions to " << (dir / "demos.bin").string() << '\n';
  return 0;
}

int run_train_bc(const Common& c, const std::string& demos_path) {
  RunConfig cfg = load(c);
  const fs::path dir = make_run_dir(c);
  save_config(dir, cfg);
  const TrajectorySet demos = load_demos(demos_path, cfg);
  bc::BcConfig bc_cfg = cfg.bc;
  bc_cfg.seed = c.seed;
  const bc::BcResult res = bc::train_bc(demos, cfg.variant, cfg.hidden, bc_cfg);
  for (const auto& w : res.report.warnings) std::cerr << "warning: " << w << '\n';
  write_bc_report(dir / "bc_report.csv", res.report);
  checkpoint::save_policy(dir / "policy_bc.ckpt", res.params, res.norm, demos.fingerprint);
  std::cout << "validation accuracy " << res.report.final_validation_accuracy() << '\n';
  return 0;
}

int run_train_rail(const Common& c, const std::string& demos_path, const std::string& init_path,
                   bool strict_init, std::optional<int> iterations) {
  RunConfig cfg = load(c);
  if (iterations) cfg.rail.iterations = *iterations;
  cfg.rail.seed = c.seed;
  cfg.validate();
  const fs::path dir = make_run_dir(c);
  save_config(dir, cfg);
  const TrajectorySet demos = load_demos(demos_path, cfg);
  const std::uint64_t fp = demos.fingerprint;

  policy::PolicyParams init;
  policy::NormalizerState norm;
  if (!init_path.empty()) {
    checkpoint::PolicyCheckpoint ck = load_checked_policy(init_path, cfg);
    init = std::move(ck.params);
    norm = std::move(ck.norm);
  } else if (strict_init) {
    init = policy::make_zero_policy(cfg.variant, static_cast<int>(demos.n), cfg.hidden);
    if (cfg.variant == policy::Variant::TwoLayer) {
      std::mt19937_64 rng(c.seed);
      init = policy::make_random_policy(cfg.variant, static_cast<int>(demos.n), cfg.hidden, rng);
    }
    norm = policy::make_normalizer(static_cast<int>(demos.n));
  } else {
    bc::BcConfig bc_cfg = cfg.bc;
    bc_cfg.seed = c.seed;
    bc::BcResult res = bc::train_bc(demos, cfg.variant, cfg.hidden, bc_cfg);
    write_bc_report(dir / "bc_report.csv", res.report);
    checkpoint::save_policy(dir / "policy_bc.ckpt", res.params, res.norm, fp);
    init = std::move(res.params);
    norm = std::move(res.norm);
  }

  auto csv = open_out(dir / "training.csv");
  harness::write_training_header(csv);
  trainer::TrainHooks hooks;
  hooks.on_iteration = [&](const trainer::IterationReport& r) {
    harness::write_training_row(csv, r);
    csv.flush();
    if ((r.iteration + 1) % 10 == 0) {
      std::cout << "iter " << r.iteration + 1 << " score " << r.mean_score << " speed "
                << r.mean_speed * harness::kMpsToKmh << " km/h collisions " << r.collision_rate << std::endl;
    }
  };
  if (cfg.checkpoint_every > 0) {
    hooks.on_checkpoint = [&](int it, const policy::PolicyParams& p, const policy::NormalizerState& n,
                              const disc::DiscriminatorParams& d) {
      if ((it + 1) % cfg.checkpoint_every != 0) return;
      std::ostringstream stem;
      stem << std::setw(5) << std::setfill('0') << it + 1;
      checkpoint::save_policy(dir / ("policy_iter" + stem.str() + ".ckpt"), p, n, fp);
      checkpoint::save_discriminator(dir / ("disc_iter" + stem.str() + ".ckpt"), d, fp);
    };
  }
  const trainer::TrainResult res = trainer::train(cfg.rail_setup(), demos, init, norm, nullptr, hooks);
  checkpoint::save_policy(dir / "policy_final.ckpt", res.policy, res.norm, fp);
  checkpoint::save_discriminator(dir / "disc_final.ckpt", res.disc, fp);
  std::cout << "wrote " << (dir / "policy_final.ckpt").string() << '\n';
  return 0;
}

int run_evaluate(const Common& c, const std::string& policy_path, bool use_expert, std::optional<int> episodes) {
  RunConfig cfg = load(c);
  const int count = episodes.value_or(cfg.eval_episodes);
  const fs::path dir = make_run_dir(c);
  save_config(dir, cfg);
  harness::MetricsReport rep;
  std::string name;
  if (use_expert) {
    rep = harness::evaluate_expert(cfg.env, cfg.sensor, cfg.expert, count, c.seed);
    name = "expert";
  } else {
    rep = harness::evaluate_checkpoint(policy_path, cfg.env, cfg.sensor, count, c.seed);
    name = fs::path(policy_path).stem().string();
  }
  auto out = open_out(dir / "metrics.csv");
  harness::write_metrics_csv(out, {{name, rep}});
  print_report(name, rep);
  return 0;
}

int run_sweep(const Common& c, const std::vector<int>& budgets) {
  RunConfig cfg = load(c);
  const fs::path dir = make_run_dir(c);
  save_config(dir, cfg);
  harness::SweepOptions opts;
  opts.budgets = budgets;
  opts.seed = c.seed;
  opts.log = [](const std::string& s) { std::cout << s << std::endl; };
  const auto rows = harness::sweep_demo_budget(cfg, opts);
  auto out = open_out(dir / "sweep.csv");
  harness::write_sweep_csv(out, rows);
  for (const auto& r : rows) {
    print_report("budget " + std::to_string(r.budget) + " " + r.method, r.raw);
  }
  return 0;
}

int run_replay(const Common& c, const std::string& policy_path, bool use_expert, const std::string& out_path) {
  RunConfig cfg = load(c);
  fs::path target = out_path;
  if (target.empty()) target = make_run_dir(c) / "replay.csv";
  harness::Controller ctl;
  if (use_expert) {
    ctl = harness::expert_controller(cfg.env, cfg.expert);
  } else {
    const checkpoint::PolicyCheckpoint ck = load_checked_policy(policy_path, cfg);
    ctl = harness::policy_controller(ck.params, ck.norm);
  }
  const env::EpisodeMetrics m = harness::write_replay_file(target, cfg.env, cfg.sensor, ctl, c.seed);
  std::cout << "wrote " << m.steps << " steps to " << target.string() << (m.collided ? " (collision)" : "") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RAIL highway imitation toolkit"};
  app.require_subcommand(1);

  Common common;
  int episodes = 40;
  std::string demos_path, policy_path, init_path, out_path;
  bool strict_init = false, use_expert = false;
  std::optional<int> iterations, eval_episodes;
  std::vector<int> budgets{10, 20, 40};

  auto* rec = app.add_subcommand("record-expert", "Record scripted-expert demonstrations");
  add_common(rec, common);
  rec->add_option("--episodes", episodes, "Number of episodes")->check(CLI::PositiveNumber);

  auto* bc_cmd = app.add_subcommand("train-bc", "Behavior cloning on recorded demonstrations");
  add_common(bc_cmd, common);
  bc_cmd->add_option("--demos", demos_path, "Demonstration file")->required()->check(CLI::ExistingFile);

  auto* tr = app.add_subcommand("train-rail", "Adversarial random-search training");
  add_common(tr, common);
  tr->add_option("--demos", demos_path, "Demonstration file")->required()->check(CLI::ExistingFile);
  tr->add_option("--init", init_path, "Initial policy checkpoint (default: behavior cloning)")
      ->check(CLI::ExistingFile);
  tr->add_flag("--strict-init", strict_init, "Start from zero weights and an identity normalizer");
  tr->add_option("--iterations", iterations, "Override rail.iterations");

  auto* ev = app.add_subcommand("evaluate", "Evaluate a policy checkpoint or the expert");
  add_common(ev, common);
  auto* ev_policy = ev->add_option("--policy", policy_path, "Policy checkpoint")->check(CLI::ExistingFile);
  auto* ev_expert = ev->add_flag("--expert", use_expert, "Evaluate the scripted expert");
  ev_policy->excludes(ev_expert);
  ev->add_option("--episodes", eval_episodes, "Override eval.episodes");

  auto* sw = app.add_subcommand("sweep", "Demonstration-budget sweep");
  add_common(sw, common);
  sw->add_option("--budgets", budgets, "Episode budgets")->delimiter(',');

  auto* rp = app.add_subcommand("replay", "Dump one episode as CSV");
  add_common(rp, common);
  auto* rp_policy = rp->add_option("--policy", policy_path, "Policy checkpoint")->check(CLI::ExistingFile);
  auto* rp_expert = rp->add_flag("--expert", use_expert, "Replay the scripted expert");
  rp_policy->excludes(rp_expert);
  rp->add_option("--out", out_path, "Output CSV path (default <run dir>/replay.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*rec) return run_record(common, episodes);
    if (*bc_cmd) return run_train_bc(common, demos_path);
    if (*tr) return run_train_rail(common, demos_path, init_path, strict_init, iterations);
    if (*ev || *rp) {
      if (policy_path.empty() && !use_expert) {
        std::cerr << "error: one of --policy or --expert is required\n";
        return 1;
      }
      return *ev ? run_evaluate(common, policy_path, use_expert, eval_episodes)
                 : run_replay(common, policy_path, use_expert, out_path);
    }
    if (*sw) return run_sweep(common, budgets);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
