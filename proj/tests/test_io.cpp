#include <doctest.h>

#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "rail/checkpoint.hpp"
#include "rail/config.hpp"
#include "rail/errors.hpp"
#include "rail/parallel.hpp"
#include "rail/trajectory.hpp"
#include "support.hpp"

using namespace rail;
using rail::test::random_matrix;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("rail_test_io_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename T>
T read_at(const std::string& bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

TrajectorySet small_set(std::mt19937_64& rng, std::uint64_t fingerprint = 42) {
  TrajectorySet set;
  set.n = 3;
  set.ray_count = 1;
  set.fingerprint = fingerprint;
  for (int e = 0; e < 2; ++e) {
    Trajectory t;
    t.observations = random_matrix(3, 4 + e, rng);
    for (int i = 0; i < 4 + e; ++i) t.actions.push_back(action_from_index(i % 5));
    set.episodes.push_back(t);
  }
  return set;
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(
      "# comment\n"
      "env.lane_count = 4   # trailing\n"
      "\n"
      "disc.learning_rate=5e-4\n"
      "sensor.include_ego_speed = false\n"
      "policy.variant = linear\n"
      "rail.seed = 18446744073709551615\n"
      "bc.optimizer = sgd\n");
  CHECK(c.env.lane_count == 4);
  CHECK(c.disc.learning_rate == 5e-4);
  CHECK_FALSE(c.sensor.include_ego_speed);
  CHECK(c.variant == policy::Variant::Linear);
  CHECK(c.rail.seed == 18446744073709551615ULL);
  CHECK(c.bc.optimizer == bc::Optimizer::Sgd);
  CHECK(c.env.lane_width == 4.0);

  CHECK_THROWS_AS(parse_config("env.no_such_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("env.lane_count 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("env.lane_count = four\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("env.lane_count = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("rail.top_b = 99\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("bc.validation_fraction = 0.7\n"), ConfigError);
}

TEST_CASE("config text round trip") {
  RunConfig c;
  c.env.traffic_density = 1.25;
  c.disc.max_batches_per_epoch = 7;
  c.rail.absorbing_terminal = false;
  c.variant = policy::Variant::Linear;
  c.hidden = 32;
  const RunConfig back = parse_config(to_config_text(c));
  CHECK(back.env == c.env);
  CHECK(back.sensor == c.sensor);
  CHECK(back.disc == c.disc);
  CHECK(back.expert == c.expert);
  CHECK(back.bc == c.bc);
  CHECK(back.rail == c.rail);
  CHECK(back.variant == c.variant);
  CHECK(back.hidden == c.hidden);
  CHECK(to_config_text(back) == to_config_text(c));

  const auto path = temp_path("cfg.txt");
  std::ofstream(path) << "env.horizon = 123\n";
  CHECK(load_config(path).env.horizon == 123);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_config(temp_path("missing.txt")), ConfigError);
}

TEST_CASE("fingerprint tracks env and sensor settings only") {
  RunConfig a, b;
  CHECK(config_fingerprint(a.env, a.sensor) == config_fingerprint(b.env, b.sensor));
  b.disc.learning_rate = 0.5;
  CHECK(config_fingerprint(a.env, a.sensor) == config_fingerprint(b.env, b.sensor));
  b.env.c_lat = 0.2;
  CHECK(config_fingerprint(a.env, a.sensor) != config_fingerprint(b.env, b.sensor));
  b = a;
  b.sensor.ray_count = 12;
  CHECK(config_fingerprint(a.env, a.sensor) != config_fingerprint(b.env, b.sensor));
}

TEST_CASE("trajectory file round trip and layout") {
  std::mt19937_64 rng(1);
  const auto set = small_set(rng);
  const auto path = temp_path("traj.bin");
  write_trajectories(path, set);
  const TrajectorySet back = read_trajectories(path);
  CHECK(back.n == 3);
  CHECK(back.p == 5);
  CHECK(back.ray_count == 1);
  CHECK(back.fingerprint == 42);
  REQUIRE(back.episodes.size() == 2);
  CHECK(back.episodes[0] == set.episodes[0]);
  CHECK(back.episodes[1] == set.episodes[1]);
  CHECK(back.transition_count() == 9);

  const std::string bytes = slurp(path);
  CHECK(bytes.substr(0, 8) == "RAILTRAJ");
  CHECK(read_at<std::uint32_t>(bytes, 8) == kTrajectoryFormatVersion);
  CHECK(read_at<std::uint32_t>(bytes, 12) == 3);
  CHECK(read_at<std::uint64_t>(bytes, 24) == 42);
  CHECK(read_at<std::uint32_t>(bytes, 32) == 2);
  CHECK(read_at<std::uint32_t>(bytes, 36) == 4);
  CHECK(read_at<double>(bytes, 40) == set.episodes[0].observations(0, 0));
  CHECK(read_at<double>(bytes, 48) == set.episodes[0].observations(1, 0));
  CHECK(static_cast<int>(bytes[40 + 24]) == 0);
  // header + 2 step counts + 9 steps of 3 doubles and a byte
  CHECK(bytes.size() == 36 + 2 * 4 + 9 * (3 * 8 + 1));
  std::filesystem::remove(path);
}

TEST_CASE("append checks the fingerprint") {
  std::mt19937_64 rng(2);
  const auto path = temp_path("append.bin");
  std::filesystem::remove(path);
  append_trajectories(path, small_set(rng));
  append_trajectories(path, small_set(rng));
  CHECK(read_trajectories(path).episodes.size() == 4);
  CHECK_THROWS_AS(append_trajectories(path, small_set(rng, 43)), FingerprintMismatch);
  CHECK(read_trajectories(path).episodes.size() == 4);
  std::filesystem::remove(path);
}

TEST_CASE("corrupt trajectory files are rejected") {
  const auto path = temp_path("bad.bin");
  std::ofstream(path, std::ios::binary) << "NOTATRAJECTORYFILE";
  CHECK_THROWS_AS(read_trajectories(path), IoError);
  std::mt19937_64 rng(3);
  write_trajectories(path, small_set(rng));
  std::string bytes = slurp(path);
  bytes.resize(bytes.size() - 5);
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
  CHECK_THROWS_AS(read_trajectories(path), IoError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_trajectories(path), IoError);
}

TEST_CASE("prefix and stacking") {
  std::mt19937_64 rng(4);
  const auto set = small_set(rng);
  const auto first = set.prefix(1);
  CHECK(first.episodes.size() == 1);
  CHECK(first.fingerprint == set.fingerprint);
  const Eigen::MatrixXd stacked = set.stacked_observations();
  CHECK(stacked.cols() == 9);
  CHECK(stacked.col(4) == set.episodes[1].observations.col(0));
  CHECK(set.stacked_actions().size() == 9);
}

TEST_CASE("policy checkpoint round trip") {
  std::mt19937_64 rng(5);
  for (policy::Variant v : {policy::Variant::Linear, policy::Variant::TwoLayer}) {
    const auto p = policy::make_random_policy(v, 6, 4, rng);
    auto norm = policy::make_normalizer(6, 1e-6);
    for (int i = 0; i < 5; ++i) policy::update_normalizer_inplace(norm, rail::test::random_vector(6, rng));
    const auto path = temp_path("policy.ckpt");
    checkpoint::save_policy(path, p, norm, 99);
    const auto back = checkpoint::load_policy(path);
    CHECK(back.params == p);
    CHECK(back.norm == norm);
    CHECK(back.fingerprint == 99);

    const std::string bytes = slurp(path);
    CHECK(bytes.substr(0, 8) == "RAILCKPT");
    CHECK(read_at<std::uint32_t>(bytes, 12) == 1);
    CHECK(read_at<std::uint32_t>(bytes, 24) == static_cast<std::uint32_t>(v));
    CHECK(read_at<std::uint32_t>(bytes, 28) == 6);
    // First weight, row-major
    CHECK(read_at<double>(bytes, 40) == p.net.weights[0](0, 0));
    CHECK(read_at<double>(bytes, 48) == p.net.weights[0](0, 1));
    CHECK_THROWS_AS(checkpoint::load_discriminator(path), IoError);
    std::filesystem::remove(path);
  }
  CHECK_THROWS_AS(checkpoint::load_policy(temp_path("nope.ckpt")), IoError);
}

TEST_CASE("discriminator checkpoint round trip") {
  std::mt19937_64 rng(6);
  const auto phi = disc::make_discriminator(7, 5, 9, rng);
  const auto path = temp_path("disc.ckpt");
  checkpoint::save_discriminator(path, phi, 7);
  const auto back = checkpoint::load_discriminator(path);
  CHECK(back.params == phi);
  CHECK(back.fingerprint == 7);
  CHECK_THROWS_AS(checkpoint::load_policy(path), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  for (int threads : {1, 2, 4}) {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  CHECK(thread_count() >= 1);
}
