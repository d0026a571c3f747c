#include "rail/checkpoint.hpp"

#include <fstream>

#include "rail/binary_io.hpp"
#include "rail/errors.hpp"

namespace rail::checkpoint {

namespace {

constexpr char kMagic[9] = "RAILCKPT";
constexpr std::uint32_t kPolicyKind = 1;
constexpr std::uint32_t kDiscriminatorKind = 2;

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) bin::write_le<double>(out, m(r, c));
  }
}

Eigen::MatrixXd read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = bin::read_le<double>(in);
  }
  return m;
}

std::ofstream open_out(const std::filesystem::path& path, std::uint32_t kind, std::uint64_t fp) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  bin::write_magic(out, kMagic);
  bin::write_le<std::uint32_t>(out, kFormatVersion);
  bin::write_le<std::uint32_t>(out, kind);
  bin::write_le<std::uint64_t>(out, fp);
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::uint32_t kind, std::uint64_t& fp) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  bin::expect_magic(in, kMagic, "checkpoint");
  const auto version = bin::read_le<std::uint32_t>(in);
  if (version != kFormatVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto stored_kind = bin::read_le<std::uint32_t>(in);
  if (stored_kind != kind) throw IoError("checkpoint holds a different model kind");
  fp = bin::read_le<std::uint64_t>(in);
  return in;
}

}  // namespace

void save_policy(const std::filesystem::path& path, const policy::PolicyParams& params,
                 const policy::NormalizerState& norm, std::uint64_t fingerprint) {
  auto out = open_out(path, kPolicyKind, fingerprint);
  bin::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.variant));
  bin::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.input_dim()));
  bin::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.hidden_dim()));
  bin::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.output_dim()));
  for (const auto& w : params.net.weights) write_matrix(out, w);
  if (norm.dim() != params.input_dim()) throw std::invalid_argument("save_policy: normalizer dimension mismatch");
  bin::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(norm.count));
  for (Eigen::Index i = 0; i < norm.mean.size(); ++i) bin::write_le<double>(out, norm.mean[i]);
  for (Eigen::Index i = 0; i < norm.m2.size(); ++i) bin::write_le<double>(out, norm.m2[i]);
  bin::write_le<double>(out, norm.epsilon);
  if (!out) throw IoError("write failed for " + path.string());
}

PolicyCheckpoint load_policy(const std::filesystem::path& path) {
  PolicyCheckpoint ck;
  try {
    auto in = open_in(path, kPolicyKind, ck.fingerprint);
    const auto variant = bin::read_le<std::uint32_t>(in);
    if (variant > 1) throw IoError("unknown policy variant " + std::to_string(variant));
    const auto n = static_cast<int>(bin::read_le<std::uint32_t>(in));
    const auto h = static_cast<int>(bin::read_le<std::uint32_t>(in));
    const auto p = static_cast<int>(bin::read_le<std::uint32_t>(in));
    ck.params = policy::make_zero_policy(static_cast<policy::Variant>(variant), n, h, p);
    for (auto& w : ck.params.net.weights) w = read_matrix(in, w.rows(), w.cols());
    ck.norm = policy::make_normalizer(n);
    ck.norm.count = static_cast<std::int64_t>(bin::read_le<std::uint64_t>(in));
    for (int i = 0; i < n; ++i) ck.norm.mean[i] = bin::read_le<double>(in);
    for (int i = 0; i < n; ++i) ck.norm.m2[i] = bin::read_le<double>(in);
    ck.norm.epsilon = bin::read_le<double>(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return ck;
}

void save_discriminator(const std::filesystem::path& path, const disc::DiscriminatorParams& params,
                        std::uint64_t fingerprint) {
  auto out = open_out(path, kDiscriminatorKind, fingerprint);
  bin::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.layer_count() + 1));
  bin::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.input_dim()));
  for (const auto& w : params.weights) bin::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.rows()));
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    write_matrix(out, params.weights[l]);
    for (Eigen::Index i = 0; i < params.biases[l].size(); ++i) bin::write_le<double>(out, params.biases[l][i]);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

DiscriminatorCheckpoint load_discriminator(const std::filesystem::path& path) {
  DiscriminatorCheckpoint ck;
  try {
    auto in = open_in(path, kDiscriminatorKind, ck.fingerprint);
    const auto count = bin::read_le<std::uint32_t>(in);
    if (count < 2) throw IoError("discriminator needs at least two layer sizes");
    std::vector<int> sizes(count);
    for (auto& s : sizes) s = static_cast<int>(bin::read_le<std::uint32_t>(in));
    ck.params.hidden = nn::Activation::Tanh;
    ck.params.output = nn::Activation::Sigmoid;
    for (std::uint32_t l = 0; l + 1 < count; ++l) {
      ck.params.weights.push_back(read_matrix(in, sizes[l + 1], sizes[l]));
      Eigen::VectorXd b(sizes[l + 1]);
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = bin::read_le<double>(in);
      ck.params.biases.push_back(std::move(b));
    }
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return ck;
}

}  // namespace rail::checkpoint
