#pragma once

#include <cstdint>
#include <filesystem>

#include "rail/discriminator.hpp"
#include "rail/policy.hpp"

// Checkpoint container (all little-endian):
//   "RAILCKPT" | u32 version | u32 kind (1 policy, 2 discriminator) | u64 fingerprint | payload
// Policy payload:
//   u32 variant | u32 n | u32 h | u32 p | weight matrices row-major as f64
//   (linear: p x n; two-layer: h x n then p x h) |
//   u64 count | n x f64 mean | n x f64 m2 | f64 epsilon
// Discriminator payload:
//   u32 L | L x u32 layer sizes | per layer: weights row-major f64, then bias f64
namespace rail::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

struct PolicyCheckpoint {
  policy::PolicyParams params;
  policy::NormalizerState norm;
  std::uint64_t fingerprint = 0;
};

struct DiscriminatorCheckpoint {
  disc::DiscriminatorParams params;
  std::uint64_t fingerprint = 0;
};

void save_policy(const std::filesystem::path& path, const policy::PolicyParams& params,
                 const policy::NormalizerState& norm, std::uint64_t fingerprint);
PolicyCheckpoint load_policy(const std::filesystem::path& path);

void save_discriminator(const std::filesystem::path& path, const disc::DiscriminatorParams& params,
                        std::uint64_t fingerprint);
DiscriminatorCheckpoint load_discriminator(const std::filesystem::path& path);

}  // namespace rail::checkpoint
