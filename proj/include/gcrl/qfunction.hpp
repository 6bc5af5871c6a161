#pragma once

// Double-DQN value function over encoded (state, goal) inputs.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcrl/mlp.hpp"
#include "gcrl/rng.hpp"

namespace gcrl {

struct TrainConfig {
  double learning_rate = 5e-4;
  double gamma = 0.9;
  double tau = 0.05;
  int batch_size = 64;
  std::size_t buffer_capacity = 2'000'000;
  double epsilon_start = 1.0;
  double epsilon_floor = 0.1;
  double epsilon_decay = 0.993;
  long target_copy_interval = 4000;
  std::size_t warmup_transitions = 1000;
  int updates_per_env_step = 1;
  std::vector<int> hidden = {256, 256};
  OptimizerKind optimizer = OptimizerKind::adam;
  bool use_polyak = true;
  bool use_hard_copy = true;

  void validate() const;
};

enum class Network { primary, target };

struct TransitionBatch {
  Eigen::MatrixXd inputs;       // encoded s||g, one column per sample
  std::vector<int> actions;
  Eigen::VectorXd rewards;
  Eigen::MatrixXd next_inputs;  // encoded s'||g
  std::vector<std::uint8_t> done;

  std::size_t size() const { return actions.size(); }
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class QFunction {
 public:
  QFunction(int input_width, int action_count, const TrainConfig& cfg, Rng& init_rng);
  // Target starts as a copy of `primary`.
  QFunction(Mlp primary, OptimizerKind optimizer, double learning_rate);

  int input_width() const { return primary_.input_width(); }
  int action_count() const { return primary_.output_width(); }

  Eigen::VectorXd q_values(Network which, std::span<const double> input) const;
  Eigen::MatrixXd q_values(Network which, const Eigen::MatrixXd& inputs) const;

  // One optimiser step on the mean squared error between Q_primary(s||g, a)
  // and `targets` at the taken actions. Returns the loss before the step.
  // Throws NonFiniteLoss without touching the parameters if the loss is not
  // finite.
  double sgd_update(const TransitionBatch& batch, const Eigen::VectorXd& targets);

  void polyak_update(double tau);
  void hard_copy();

  const Mlp& primary() const { return primary_; }
  const Mlp& target() const { return target_; }
  Mlp& primary() { return primary_; }
  Mlp& target() { return target_; }

 private:
  const Mlp& net(Network which) const { return which == Network::primary ? primary_ : target_; }

  Mlp primary_;
  Mlp target_;
  Optimizer optimizer_;
};

// y = r for terminal samples, otherwise
// y = r + gamma * Q_target(s', argmax_a' Q_primary(s', a')).
Eigen::VectorXd ddqn_targets(const QFunction& qf, const TransitionBatch& batch, double gamma);

// Mean squared error of Q_primary at the taken actions; no update.
double batch_loss(const QFunction& qf, const TransitionBatch& batch,
                  const Eigen::VectorXd& targets);

// max(floor, start * decay^epoch).
double epsilon(long epoch, double start = 1.0, double floor = 0.1, double decay = 0.993);

// Argmax with ties broken towards the lowest index.
int greedy_action(const Eigen::Ref<const Eigen::VectorXd>& q);

// Epsilon-greedy over the primary network.
int act(const QFunction& qf, std::span<const double> input, double eps, Rng& rng);

}  // namespace gcrl
