#include "gcrl/qfunction.hpp"

#include <algorithm>
#include <cmath>

namespace gcrl {

void TrainConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in (0, 1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in [0, 1)");
  if (!(epsilon_decay > 0.0 && epsilon_decay < 1.0))
    throw std::invalid_argument("epsilon_decay must be in (0, 1)");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (buffer_capacity < 1) throw std::invalid_argument("buffer_capacity must be >= 1");
  if (target_copy_interval < 1) throw std::invalid_argument("target_copy_interval must be >= 1");
  if (updates_per_env_step < 0) throw std::invalid_argument("updates_per_env_step must be >= 0");
  if (warmup_transitions < static_cast<std::size_t>(batch_size))
    throw std::invalid_argument("warmup_transitions must be >= batch_size");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("hidden layer widths must be positive");
}

namespace {

std::vector<int> layer_sizes(int input_width, int action_count, const std::vector<int>& hidden) {
  std::vector<int> sizes{input_width};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_count);
  return sizes;
}

}  // namespace

QFunction::QFunction(int input_width, int action_count, const TrainConfig& cfg, Rng& init_rng)
    : primary_(Mlp::random(layer_sizes(input_width, action_count, cfg.hidden), init_rng)),
      target_(primary_),
      optimizer_(cfg.optimizer, cfg.learning_rate, primary_) {}

QFunction::QFunction(Mlp primary, OptimizerKind optimizer, double learning_rate)
    : primary_(std::move(primary)), target_(primary_), optimizer_(optimizer, learning_rate, primary_) {}

Eigen::VectorXd QFunction::q_values(Network which, std::span<const double> input) const {
  return net(which).forward(input);
}

Eigen::MatrixXd QFunction::q_values(Network which, const Eigen::MatrixXd& inputs) const {
  return net(which).forward(inputs);
}

double QFunction::sgd_update(const TransitionBatch& batch, const Eigen::VectorXd& targets) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0 || targets.size() != n || batch.inputs.cols() != n)
    throw std::invalid_argument("sgd_update: batch and targets do not align");
  Mlp::Cache cache;
  const Eigen::MatrixXd q = primary_.forward(batch.inputs, &cache);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double err = q(batch.actions[j], j) - targets(j);
    loss += err * err;
    grad(batch.actions[j], j) = 2.0 * err / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) throw NonFiniteLoss("sgd_update: non-finite loss " + std::to_string(loss));
  optimizer_.step(primary_, primary_.backward(cache, grad));
  return loss;
}

void QFunction::polyak_update(double tau) { polyak_blend(target_, primary_, tau); }

void QFunction::hard_copy() { target_ = primary_; }

Eigen::VectorXd ddqn_targets(const QFunction& qf, const TransitionBatch& batch, double gamma) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) throw std::invalid_argument("ddqn_targets: empty batch");
  const Eigen::MatrixXd online = qf.q_values(Network::primary, batch.next_inputs);
  const Eigen::MatrixXd target = qf.q_values(Network::target, batch.next_inputs);
  Eigen::VectorXd y(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    y(j) = batch.rewards(j);
    if (!batch.done[j]) y(j) += gamma * target(greedy_action(online.col(j)), j);
  }
  return y;
}

double batch_loss(const QFunction& qf, const TransitionBatch& batch,
                  const Eigen::VectorXd& targets) {
  const Eigen::MatrixXd q = qf.q_values(Network::primary, batch.inputs);
  double loss = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const double err = q(batch.actions[j], j) - targets(j);
    loss += err * err;
  }
  return loss / static_cast<double>(batch.size());
}

double epsilon(long epoch, double start, double floor, double decay) {
  if (epoch < 0) throw std::invalid_argument("epsilon: negative epoch");
  return std::max(floor, start * std::pow(decay, static_cast<double>(epoch)));
}

int greedy_action(const Eigen::Ref<const Eigen::VectorXd>& q) {
  int best = 0;
  for (Eigen::Index a = 1; a < q.size(); ++a)
    if (q(a) > q(best)) best = static_cast<int>(a);
  return best;
}

int act(const QFunction& qf, std::span<const double> input, double eps, Rng& rng) {
  if (rng.uniform() < eps) return static_cast<int>(rng.index(qf.action_count()));
  return greedy_action(qf.q_values(Network::primary, input));
}

}  // namespace gcrl
