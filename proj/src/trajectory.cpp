#include "rail/trajectory.hpp"

#include <fstream>
#include <sstream>

#include "rail/binary_io.hpp"
#include "rail/errors.hpp"

namespace rail {

namespace {

constexpr char kMagic[9] = "RAILTRAJ";

void write_episode(std::ostream& out, const Trajectory& t, std::uint32_t n) {
  if (static_cast<std::uint32_t>(t.observations.rows()) != n ||
      static_cast<std::size_t>(t.observations.cols()) != t.actions.size()) {
    throw std::invalid_argument("trajectory shape does not match the file header");
  }
  bin::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.actions.size()));
  for (std::size_t s = 0; s < t.actions.size(); ++s) {
    for (std::uint32_t i = 0; i < n; ++i) {
      bin::write_le<double>(out, t.observations(i, static_cast<Eigen::Index>(s)));
    }
    bin::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(action_index(t.actions[s])));
  }
}

}  // namespace

std::size_t TrajectorySet::transition_count() const {
  std::size_t total = 0;
  for (const auto& e : episodes) total += e.actions.size();
  return total;
}

Eigen::MatrixXd TrajectorySet::stacked_observations() const {
  Eigen::MatrixXd all(n, static_cast<Eigen::Index>(transition_count()));
  Eigen::Index c = 0;
  for (const auto& e : episodes) {
    all.middleCols(c, e.observations.cols()) = e.observations;
    c += e.observations.cols();
  }
  return all;
}

std::vector<Action> TrajectorySet::stacked_actions() const {
  std::vector<Action> all;
  all.reserve(transition_count());
  for (const auto& e : episodes) all.insert(all.end(), e.actions.begin(), e.actions.end());
  return all;
}

TrajectorySet TrajectorySet::prefix(std::size_t count) const {
  TrajectorySet out = *this;
  if (count < out.episodes.size()) out.episodes.resize(count);
  return out;
}

void write_trajectories(const std::filesystem::path& path, const TrajectorySet& set) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  bin::write_magic(out, kMagic);
  bin::write_le<std::uint32_t>(out, kTrajectoryFormatVersion);
  bin::write_le<std::uint32_t>(out, set.n);
  bin::write_le<std::uint32_t>(out, set.p);
  bin::write_le<std::uint32_t>(out, set.ray_count);
  bin::write_le<std::uint64_t>(out, set.fingerprint);
  bin::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.episodes.size()));
  for (const auto& e : set.episodes) write_episode(out, e, set.n);
  if (!out) throw IoError("write failed for " + path.string());
}

TrajectorySet read_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    bin::expect_magic(in, kMagic, "trajectory");
    const auto version = bin::read_le<std::uint32_t>(in);
    if (version != kTrajectoryFormatVersion) {
      throw IoError("unsupported trajectory format version " + std::to_string(version));
    }
    TrajectorySet set;
    set.n = bin::read_le<std::uint32_t>(in);
    set.p = bin::read_le<std::uint32_t>(in);
    set.ray_count = bin::read_le<std::uint32_t>(in);
    set.fingerprint = bin::read_le<std::uint64_t>(in);
    const auto episodes = bin::read_le<std::uint32_t>(in);
    for (std::uint32_t e = 0; e < episodes; ++e) {
      Trajectory t;
      const auto steps = bin::read_le<std::uint32_t>(in);
      t.observations.resize(set.n, steps);
      t.actions.resize(steps);
      for (std::uint32_t s = 0; s < steps; ++s) {
        for (std::uint32_t i = 0; i < set.n; ++i) t.observations(i, s) = bin::read_le<double>(in);
        const auto a = bin::read_le<std::uint8_t>(in);
        if (a >= set.p) throw IoError("action index out of range");
        t.actions[s] = action_from_index(a);
      }
      set.episodes.push_back(std::move(t));
    }
    return set;
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void append_trajectories(const std::filesystem::path& path, const TrajectorySet& set) {
  if (!std::filesystem::exists(path)) {
    write_trajectories(path, set);
    return;
  }
  TrajectorySet existing = read_trajectories(path);
  if (existing.fingerprint != set.fingerprint || existing.n != set.n || existing.p != set.p ||
      existing.ray_count != set.ray_count) {
    throw FingerprintMismatch(path.string() +
                              ": refusing to append episodes recorded under a different env/sensor config");
  }
  existing.episodes.insert(existing.episodes.end(), set.episodes.begin(), set.episodes.end());
  write_trajectories(path, existing);
}

}  // namespace rail
