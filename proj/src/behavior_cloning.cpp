#include "rail/behavior_cloning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "rail/errors.hpp"

namespace rail::bc {

namespace {

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const Eigen::ArrayXd e = (logits.col(c).array() - logits.col(c).maxCoeff()).exp();
    p.col(c) = (e / e.sum()).matrix();
  }
  return p;
}

double batch_accuracy(const policy::PolicyParams& params, const Eigen::MatrixXd& z,
                      const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  const Eigen::MatrixXd logits = nn::forward(params.net, z);
  std::size_t hits = 0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    if (action_index(policy::argmax_action(logits.col(c))) == labels[static_cast<std::size_t>(c)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& z, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(z.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = z.col(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

std::vector<int> gather(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
  return out;
}

}  // namespace

void BcConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("bc.learning_rate must be >= 0");
  if (epochs < 0) throw ConfigError("bc.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("bc.batch_size must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 0.5)) {
    throw ConfigError("bc.validation_fraction must be in (0, 0.5)");
  }
}

policy::NormalizerState fit_normalizer(const TrajectorySet& expert) {
  if (expert.transition_count() == 0) throw std::invalid_argument("fit_normalizer: no expert transitions");
  policy::NormalizerState norm = policy::make_normalizer(static_cast<int>(expert.n));
  for (const auto& e : expert.episodes) {
    for (Eigen::Index c = 0; c < e.observations.cols(); ++c) {
      policy::update_normalizer_inplace(norm, e.observations.col(c));
    }
  }
  return norm;
}

double cross_entropy(const policy::PolicyParams& params, const Eigen::MatrixXd& z,
                     const std::vector<int>& labels) {
  const Eigen::MatrixXd logits = nn::forward(params.net, z);
  double loss = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    const double lse = m + std::log((logits.col(c).array() - m).exp().sum());
    loss += lse - logits(labels[static_cast<std::size_t>(c)], c);
  }
  return loss / static_cast<double>(logits.cols());
}

nn::Mlp cross_entropy_grad(const policy::PolicyParams& params, const Eigen::MatrixXd& z,
                           const std::vector<int>& labels, double* loss) {
  if (z.cols() == 0 || static_cast<std::size_t>(z.cols()) != labels.size()) {
    throw std::invalid_argument("cross_entropy_grad: empty or mismatched batch");
  }
  nn::Tape tape;
  const Eigen::MatrixXd logits = nn::forward(params.net, z, &tape);
  Eigen::MatrixXd grad = softmax_columns(logits);
  const auto batch = static_cast<double>(z.cols());
  double total = 0.0;
  for (Eigen::Index c = 0; c < grad.cols(); ++c) {
    const int y = labels[static_cast<std::size_t>(c)];
    total -= std::log(std::max(grad(y, c), 1e-300));
    grad(y, c) -= 1.0;
  }
  grad /= batch;
  if (loss) *loss = total / batch;
  return nn::backward(params.net, tape, grad);
}

BcResult train_bc(const TrajectorySet& expert, policy::PolicyParams init, const BcConfig& cfg) {
  cfg.validate();
  const std::size_t total = expert.transition_count();
  if (total < static_cast<std::size_t>(cfg.batch_size)) {
    throw std::invalid_argument("train_bc: need at least batch_size expert transitions");
  }
  if (init.input_dim() != static_cast<int>(expert.n) || init.output_dim() != static_cast<int>(expert.p)) {
    throw std::invalid_argument("train_bc: policy shape does not match the demonstrations");
  }

  BcResult result;
  result.norm = fit_normalizer(expert);
  const Eigen::MatrixXd z = policy::normalize_batch(expert.stacked_observations(), result.norm);
  std::vector<int> labels;
  labels.reserve(total);
  for (Action a : expert.stacked_actions()) labels.push_back(action_index(a));

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto val_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(cfg.validation_fraction * static_cast<double>(total))));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(val_count));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(val_count), order.end());

  const Eigen::MatrixXd z_val = gather(z, val_idx);
  const std::vector<int> y_val = gather(labels, val_idx);
  const Eigen::MatrixXd z_train = gather(z, train_idx);
  const std::vector<int> y_train = gather(labels, train_idx);

  BcReport& report = result.report;
  report.train_size = train_idx.size();
  report.validation_size = val_idx.size();
  std::vector<std::size_t> class_counts(expert.p, 0);
  for (int y : y_train) ++class_counts[static_cast<std::size_t>(y)];
  for (std::size_t k = 0; k < class_counts.size(); ++k) {
    if (class_counts[k] == 0) {
      report.warnings.push_back("action '" + std::string(action_name(action_from_index(static_cast<int>(k)))) +
                                "' never appears in the training data");
    }
  }

  policy::PolicyParams& params = result.params;
  params = std::move(init);
  nn::Adam adam(params.net, cfg.learning_rate);
  report.initial_train_loss = cross_entropy(params, z_train, y_train);

  std::vector<std::size_t> batch_order(train_idx.size());
  std::iota(batch_order.begin(), batch_order.end(), 0);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(batch_order.begin(), batch_order.end(), rng);
    for (std::size_t start = 0; start < batch_order.size(); start += batch) {
      const std::size_t end = std::min(start + batch, batch_order.size());
      const std::vector<std::size_t> idx(batch_order.begin() + static_cast<std::ptrdiff_t>(start),
                                         batch_order.begin() + static_cast<std::ptrdiff_t>(end));
      const nn::Mlp grad = cross_entropy_grad(params, gather(z_train, idx), gather(y_train, idx));
      if (cfg.optimizer == Optimizer::Adam) {
        adam.step(params.net, grad);
      } else {
        for (std::size_t l = 0; l < params.net.weights.size(); ++l) {
          params.net.weights[l] -= cfg.learning_rate * grad.weights[l];
        }
      }
    }
    if (!params.net.all_finite()) throw NumericalAbort("behavior cloning produced non-finite weights");
    BcEpoch e;
    e.epoch = epoch;
    e.train_loss = cross_entropy(params, z_train, y_train);
    e.train_accuracy = batch_accuracy(params, z_train, y_train);
    e.validation_accuracy = batch_accuracy(params, z_val, y_val);
    report.epochs.push_back(e);
  }
  return result;
}

BcResult train_bc(const TrajectorySet& expert, policy::Variant variant, int hidden, const BcConfig& cfg) {
  std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
  return train_bc(expert,
                  policy::make_random_policy(variant, static_cast<int>(expert.n), hidden, rng,
                                             static_cast<int>(expert.p)),
                  cfg);
}

double action_match_accuracy(const policy::PolicyParams& params, const policy::NormalizerState& norm,
                             const Eigen::MatrixXd& observations, const std::vector<Action>& actions) {
  if (actions.empty()) throw std::invalid_argument("action_match_accuracy: empty dataset");
  if (static_cast<std::size_t>(observations.cols()) != actions.size()) {
    throw std::invalid_argument("action_match_accuracy: observation/action count mismatch");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (policy::act(params, norm, observations.col(static_cast<Eigen::Index>(i))) == actions[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(actions.size());
}

}  // namespace rail::bc
