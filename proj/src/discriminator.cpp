#include "rail/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rail/errors.hpp"

namespace rail::disc {

void DiscConfig::validate() const {
  auto require = [](bool cond, const char* what) {
    if (!cond) throw ConfigError(std::string("invalid discriminator config: ") + what);
  };
  require(label_policy >= 0.0 && label_policy < label_expert, "need 0 <= label_policy < label_expert");
  require(learning_rate >= 0.0, "learning_rate must be >= 0");
  require(epochs_per_iteration >= 0, "epochs_per_iteration must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(replay_capacity >= 1, "replay_capacity must be >= 1");
  require(eps_d > 0.0 && eps_d < 0.5, "eps_d must be in (0, 0.5)");
  require(hidden >= 1, "hidden must be >= 1");
  require(max_batches_per_epoch >= 0, "max_batches_per_epoch must be >= 0");
}

DiscriminatorParams make_discriminator(int n, int p, int hidden, std::mt19937_64& rng) {
  return nn::make_mlp({n + p, hidden, hidden, 1}, true, nn::Activation::Tanh,
                      nn::Activation::Sigmoid, rng);
}

DiscriminatorParams make_zero_discriminator(int n, int p, int hidden) {
  std::mt19937_64 rng(0);
  return make_discriminator(n, p, hidden, rng).zeros_like();
}

Eigen::MatrixXd encode(const Eigen::MatrixXd& states, const std::vector<int>& actions, int p) {
  if (static_cast<std::size_t>(states.cols()) != actions.size()) {
    throw std::invalid_argument("encode: state and action counts differ");
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(states.rows() + p, states.cols());
  x.topRows(states.rows()) = states;
  for (Eigen::Index c = 0; c < states.cols(); ++c) {
    const int a = actions[static_cast<std::size_t>(c)];
    if (a < 0 || a >= p) throw std::invalid_argument("encode: action index out of range");
    x(states.rows() + a, c) = 1.0;
  }
  return x;
}

Eigen::VectorXd encode_one(const Eigen::VectorXd& s, int action, int p) {
  return encode(s, {action}, p).col(0);
}

double d_forward(const DiscriminatorParams& phi, const Eigen::VectorXd& s, int action) {
  const auto p = static_cast<int>(phi.input_dim() - s.size());
  return nn::forward_one(phi, encode_one(s, action, p))[0];
}

Eigen::VectorXd d_forward_batch(const DiscriminatorParams& phi, const Eigen::MatrixXd& inputs) {
  return nn::forward(phi, inputs).row(0).transpose();
}

double ls_loss(const DiscriminatorParams& phi, const Eigen::MatrixXd& expert_inputs,
               const Eigen::MatrixXd& policy_inputs, const DiscConfig& cfg) {
  if (expert_inputs.cols() == 0 || policy_inputs.cols() == 0) {
    throw std::invalid_argument("ls_loss: empty batch");
  }
  const Eigen::ArrayXd de = d_forward_batch(phi, expert_inputs).array() - cfg.label_expert;
  const Eigen::ArrayXd dp = d_forward_batch(phi, policy_inputs).array() - cfg.label_policy;
  return 0.5 * de.square().mean() + 0.5 * dp.square().mean();
}

LossGrad d_backward(const DiscriminatorParams& phi, const Eigen::MatrixXd& expert_inputs,
                    const Eigen::MatrixXd& policy_inputs, const DiscConfig& cfg) {
  if (expert_inputs.cols() == 0 || policy_inputs.cols() == 0) {
    throw std::invalid_argument("d_backward: empty batch");
  }
  const Eigen::Index ne = expert_inputs.cols();
  const Eigen::Index np = policy_inputs.cols();
  Eigen::MatrixXd x(expert_inputs.rows(), ne + np);
  x.leftCols(ne) = expert_inputs;
  x.rightCols(np) = policy_inputs;

  nn::Tape tape;
  const Eigen::MatrixXd d = nn::forward(phi, x, &tape);

  Eigen::MatrixXd grad_out(1, ne + np);
  double loss_e = 0.0, loss_p = 0.0;
  for (Eigen::Index i = 0; i < ne; ++i) {
    const double r = d(0, i) - cfg.label_expert;
    loss_e += r * r;
    grad_out(0, i) = r / static_cast<double>(ne);
  }
  for (Eigen::Index i = 0; i < np; ++i) {
    const double r = d(0, ne + i) - cfg.label_policy;
    loss_p += r * r;
    grad_out(0, ne + i) = r / static_cast<double>(np);
  }
  LossGrad out;
  out.loss = 0.5 * loss_e / static_cast<double>(ne) + 0.5 * loss_p / static_cast<double>(np);
  out.grad = nn::backward(phi, tape, grad_out);
  return out;
}

double reward_from_score(double score, double eps_d) {
  const double d = std::clamp(score, eps_d, 1.0 - eps_d);
  return std::log(d) - std::log(1.0 - d);
}

double reward(const DiscriminatorParams& phi, const Eigen::VectorXd& s, int action,
              const DiscConfig& cfg) {
  return reward_from_score(d_forward(phi, s, action), cfg.eps_d);
}

Eigen::VectorXd reward_batch(const DiscriminatorParams& phi, const Eigen::MatrixXd& inputs,
                             const DiscConfig& cfg) {
  Eigen::VectorXd scores = d_forward_batch(phi, inputs);
  for (Eigen::Index i = 0; i < scores.size(); ++i) scores[i] = reward_from_score(scores[i], cfg.eps_d);
  return scores;
}

TransitionBuffer::TransitionBuffer(int n, int p, std::size_t capacity)
    : n_(n), p_(p), capacity_(capacity), states_(n, static_cast<Eigen::Index>(capacity)),
      actions_(capacity, 0) {
  if (capacity == 0) throw std::invalid_argument("TransitionBuffer: capacity must be > 0");
}

void TransitionBuffer::push(const Eigen::VectorXd& s, int action) {
  if (s.size() != n_) throw std::invalid_argument("TransitionBuffer: state dimension mismatch");
  if (action < 0 || action >= p_) throw std::invalid_argument("TransitionBuffer: bad action");
  states_.col(static_cast<Eigen::Index>(head_)) = s;
  actions_[head_] = action;
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

void TransitionBuffer::push_batch(const Eigen::MatrixXd& states, const std::vector<Action>& actions) {
  for (Eigen::Index c = 0; c < states.cols(); ++c) {
    push(states.col(c), action_index(actions[static_cast<std::size_t>(c)]));
  }
}

Eigen::MatrixXd TransitionBuffer::sample(std::mt19937_64& rng, std::size_t count,
                                         const policy::NormalizerState* norm) const {
  if (size_ == 0) throw std::invalid_argument("TransitionBuffer: sampling from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  Eigen::MatrixXd states(n_, static_cast<Eigen::Index>(count));
  std::vector<int> acts(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = pick(rng);
    states.col(static_cast<Eigen::Index>(i)) = states_.col(static_cast<Eigen::Index>(j));
    acts[i] = actions_[j];
  }
  return encode(norm ? policy::normalize_batch(states, *norm) : states, acts, p_);
}

Eigen::MatrixXd TransitionBuffer::all(const policy::NormalizerState* norm) const {
  const Eigen::MatrixXd states = states_.leftCols(static_cast<Eigen::Index>(size_));
  std::vector<int> acts(actions_.begin(), actions_.begin() + static_cast<std::ptrdiff_t>(size_));
  return encode(norm ? policy::normalize_batch(states, *norm) : states, acts, p_);
}

DiscriminatorTrainer::DiscriminatorTrainer(const DiscriminatorParams& shape, const DiscConfig& cfg,
                                           std::uint64_t seed)
    : cfg_(cfg), adam_(shape, cfg.learning_rate), rng_(seed) {
  cfg_.validate();
}

double DiscriminatorTrainer::update(DiscriminatorParams& phi, const TransitionBuffer& expert,
                                    const TransitionBuffer& policy_buffer,
                                    const policy::NormalizerState* norm, std::size_t fresh_count) {
  const auto batch = static_cast<std::size_t>(cfg_.batch_size);
  if (expert.size() < batch || policy_buffer.size() < batch) {
    throw std::invalid_argument("d_update: buffers must hold at least batch_size transitions (expert " +
                                std::to_string(expert.size()) + ", policy " +
                                std::to_string(policy_buffer.size()) + ")");
  }
  const std::size_t pass = fresh_count > 0 ? std::min(fresh_count, policy_buffer.size())
                                           : policy_buffer.size();
  std::size_t batches = (pass + batch - 1) / batch;
  if (cfg_.max_batches_per_epoch > 0) {
    batches = std::min(batches, static_cast<std::size_t>(cfg_.max_batches_per_epoch));
  }
  double loss_sum = 0.0;
  std::size_t steps = 0;
  for (int epoch = 0; epoch < cfg_.epochs_per_iteration; ++epoch) {
    for (std::size_t b = 0; b < batches; ++b) {
      const Eigen::MatrixXd xe = expert.sample(rng_, batch, norm);
      const Eigen::MatrixXd xp = policy_buffer.sample(rng_, batch, norm);
      const LossGrad lg = d_backward(phi, xe, xp, cfg_);
      adam_.step(phi, lg.grad);
      if (!phi.all_finite()) throw NumericalAbort("discriminator update produced non-finite weights");
      loss_sum += lg.loss;
      ++steps;
    }
  }
  return steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0;
}

DiscriminatorParams d_update(DiscriminatorParams phi, const TransitionBuffer& expert,
                             const TransitionBuffer& policy_buffer, const DiscConfig& cfg,
                             std::uint64_t seed) {
  DiscriminatorTrainer trainer(phi, cfg, seed);
  trainer.update(phi, expert, policy_buffer, nullptr);
  return phi;
}

}  // namespace rail::disc
