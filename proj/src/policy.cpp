#include "rail/policy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rail/errors.hpp"

namespace rail::policy {

std::string_view variant_name(Variant v) {
  return v == Variant::Linear ? "linear" : "two_layer";
}

Variant parse_variant(std::string_view s) {
  if (s == "linear") return Variant::Linear;
  if (s == "two_layer") return Variant::TwoLayer;
  throw ConfigError("unknown policy variant: " + std::string(s));
}

PolicyParams make_zero_policy(Variant variant, int n, int h, int p) {
  PolicyParams params;
  params.variant = variant;
  params.net.hidden = nn::Activation::Tanh;
  params.net.output = nn::Activation::Identity;
  if (variant == Variant::Linear) {
    params.net.weights.push_back(Eigen::MatrixXd::Zero(p, n));
  } else {
    params.net.weights.push_back(Eigen::MatrixXd::Zero(h, n));
    params.net.weights.push_back(Eigen::MatrixXd::Zero(p, h));
  }
  return params;
}

PolicyParams make_random_policy(Variant variant, int n, int h, std::mt19937_64& rng, int p) {
  PolicyParams params;
  params.variant = variant;
  std::vector<int> sizes = variant == Variant::Linear ? std::vector<int>{n, p}
                                                      : std::vector<int>{n, h, p};
  params.net = nn::make_mlp(sizes, false, nn::Activation::Tanh, nn::Activation::Identity, rng);
  return params;
}

Eigen::VectorXd NormalizerState::variance() const {
  if (count == 0) return Eigen::VectorXd::Zero(mean.size());
  return m2 / static_cast<double>(count);
}

NormalizerState make_normalizer(int n, double epsilon) {
  NormalizerState norm;
  norm.mean = Eigen::VectorXd::Zero(n);
  norm.m2 = Eigen::VectorXd::Zero(n);
  norm.epsilon = epsilon;
  return norm;
}

Eigen::VectorXd normalize(const Eigen::VectorXd& s, const NormalizerState& norm) {
  if (s.size() != norm.mean.size()) {
    throw std::invalid_argument("normalize: observation has dimension " + std::to_string(s.size()) +
                                ", normalizer expects " + std::to_string(norm.mean.size()));
  }
  if (norm.count < 2) return s;
  const Eigen::ArrayXd sd =
      norm.variance().array().sqrt().max(std::sqrt(norm.epsilon));
  return ((s.array() - norm.mean.array()) / sd).matrix();
}

Eigen::MatrixXd normalize_batch(const Eigen::MatrixXd& s, const NormalizerState& norm) {
  if (s.rows() != norm.mean.size()) {
    throw std::invalid_argument("normalize_batch: dimension mismatch");
  }
  if (norm.count < 2) return s;
  const Eigen::ArrayXd sd = norm.variance().array().sqrt().max(std::sqrt(norm.epsilon));
  Eigen::MatrixXd out(s.rows(), s.cols());
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    out.col(c) = ((s.col(c).array() - norm.mean.array()) / sd).matrix();
  }
  return out;
}

void update_normalizer_inplace(NormalizerState& norm, const Eigen::VectorXd& obs) {
  if (norm.mean.size() == 0 && norm.count == 0) {
    norm.mean = Eigen::VectorXd::Zero(obs.size());
    norm.m2 = Eigen::VectorXd::Zero(obs.size());
  }
  if (obs.size() != norm.mean.size()) {
    throw std::invalid_argument("update_normalizer: dimension mismatch");
  }
  ++norm.count;
  const Eigen::VectorXd delta = obs - norm.mean;
  norm.mean += delta / static_cast<double>(norm.count);
  norm.m2 += delta.cwiseProduct(obs - norm.mean);
}

NormalizerState update_normalizer(NormalizerState norm, const Eigen::VectorXd& obs) {
  update_normalizer_inplace(norm, obs);
  return norm;
}

Eigen::VectorXd forward(const PolicyParams& params, const Eigen::VectorXd& z) {
  return nn::forward_one(params.net, z);
}

Action argmax_action(const Eigen::VectorXd& logits) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return action_from_index(static_cast<int>(best));
}

Action act(const PolicyParams& params, const NormalizerState& norm, const Eigen::VectorXd& obs) {
  return argmax_action(forward(params, normalize(obs, norm)));
}

PolicyParams perturb(const PolicyParams& params, const Direction& delta, double nu, int sign) {
  if (delta.size() != params.net.weights.size()) {
    throw std::invalid_argument("perturb: direction has the wrong number of matrices");
  }
  PolicyParams out = params;
  const double scale = sign >= 0 ? nu : -nu;
  for (std::size_t l = 0; l < delta.size(); ++l) {
    const auto& w = params.net.weights[l];
    if (delta[l].rows() != w.rows() || delta[l].cols() != w.cols()) {
      throw std::invalid_argument("perturb: direction shape mismatch");
    }
    out.net.weights[l] = w + scale * delta[l];
  }
  return out;
}

Direction zero_direction(const PolicyParams& params) {
  Direction d;
  for (const auto& w : params.net.weights) d.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  return d;
}

}  // namespace rail::policy
