#pragma once

// Hindsight goal relabelling: the candidate pool of achieved goals, the
// HER / EHER / CHER selection strategies, and insertion of relabelled
// episodes into replay.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcrl/digitflip.hpp"
#include "gcrl/gmdp.hpp"
#include "gcrl/mlp.hpp"
#include "gcrl/qfunction.hpp"
#include "gcrl/replay.hpp"
#include "gcrl/rng.hpp"

namespace gcrl {

using Trajectory = std::vector<DigitFlipExperience>;

enum class RelabelStrategy { none, her, eher, cher };
std::string to_string(RelabelStrategy s);
RelabelStrategy relabel_strategy_from_string(const std::string& name);

enum class MixinKind { constant_half, constant_zero, constant_one, linear_increasing, linear_decreasing };
std::string to_string(MixinKind k);
MixinKind mixin_kind_from_string(const std::string& name);

struct MixinSchedule {
  MixinKind kind = MixinKind::constant_half;
  long horizon = 1;  // training steps, used by the linear kinds
};

// Probability of picking a random goal instead of the top-scored one.
double mixin_probability(const MixinSchedule& schedule, long t);

struct RelabelEntry {
  DigitFlipGoal goal;
  double reward = 0.0;
};

// Goals satisfied by the next states of trajectory[i..end), in trajectory
// order, duplicates kept.
std::vector<DigitFlipGoal> candidate_goals(const Trajectory& trajectory, std::size_t i);
// Duplicates removed, first occurrence order kept.
std::vector<DigitFlipGoal> unique_goals(const std::vector<DigitFlipGoal>& goals);

// |R((s,a,s'),g) + gamma * max_a' Q((s',g),a') - Q((s,g),a)| on the primary
// network.
double td_error(const QFunction& qf, const DigitFlipConfig& cfg, const DigitFlipExperience& exp,
                const DigitFlipGoal& goal, double gamma);
std::vector<double> td_errors(const QFunction& qf, const DigitFlipConfig& cfg,
                              const DigitFlipExperience& exp, std::span<const DigitFlipGoal> goals,
                              double gamma);

// The selection loop shared by every strategy. k times: draw u ~ U[0,1); if
// u > mu take the remaining entry with the highest score (lowest position on
// ties), otherwise a uniformly drawn remaining entry; remove it from the pool.
// Returns pool positions in pick order; k is capped at the pool size.
std::vector<std::size_t> prioritised_pick_order(std::span<const double> scores, std::size_t k,
                                                double mu, Rng& rng);

std::vector<RelabelEntry> eher_select(const DigitFlipConfig& cfg, const Trajectory& trajectory,
                                      std::size_t i, std::size_t k, const MixinSchedule& schedule,
                                      long t, const QFunction& qf, double gamma, Rng& rng);

// Uniform without replacement; draws the same random stream as eher_select
// with a constant_one schedule.
std::vector<RelabelEntry> her_select(const DigitFlipConfig& cfg, const Trajectory& trajectory,
                                     std::size_t i, std::size_t k, Rng& rng);

struct RndConfig {
  std::vector<int> hidden = {64, 64};
  int output_width = 16;
  double learning_rate = 1e-4;
};

// Frozen random Target network and a Predict network trained to imitate it;
// their disagreement scores how novel an input is.
class RndPair {
 public:
  RndPair(int input_width, const RndConfig& cfg, Rng& rng);

  double novelty_error(std::span<const double> input) const;
  Eigen::VectorXd novelty_errors(const Eigen::MatrixXd& inputs) const;

  // One optimiser step on the mean novelty error of the columns of `inputs`;
  // returns the pre-step mean.
  double train(const Eigen::MatrixXd& inputs);

  const Mlp& target() const { return target_; }
  const Mlp& predict() const { return predict_; }
  Mlp& predict() { return predict_; }

 private:
  Mlp target_;
  Mlp predict_;
  Optimizer optimizer_;
};

// EHER with the novelty error of (s', g) as the score. Predict takes one
// training step on the selected (s', g*) inputs afterwards.
std::vector<RelabelEntry> cher_select(const DigitFlipConfig& cfg, const Trajectory& trajectory,
                                      std::size_t i, std::size_t k, const MixinSchedule& schedule,
                                      long t, RndPair& rnd, Rng& rng);

struct RelabelConfig {
  RelabelStrategy strategy = RelabelStrategy::eher;
  std::size_t k = 4;
  MixinSchedule schedule;
};

struct RelabelContext {
  const QFunction* qf = nullptr;  // required by eher
  RndPair* rnd = nullptr;         // required by cher
  double gamma = 0.9;
};

// Compact replay codes: state = [agent_pos, (adversary_pos), digits...],
// goal = digits.
std::vector<std::uint8_t> state_code(const DigitFlipConfig& cfg, const DigitFlipState& s);
std::vector<std::uint8_t> goal_code(const DigitFlipGoal& g);
DigitFlipState state_from_code(const DigitFlipConfig& cfg, std::span<const std::uint8_t> code);
DigitFlipGoal goal_from_code(std::span<const std::uint8_t> code);
std::size_t state_code_length(const DigitFlipConfig& cfg);

ReplayBuffer make_replay_buffer(const DigitFlipConfig& cfg, std::size_t capacity);

// Inserts, per experience, the tuple under the episode goal and one tuple per
// relabelled goal. done is set iff s' satisfies the tuple's goal.
void store_episode(ReplayBuffer& buffer, const DigitFlipConfig& cfg, const DigitFlipEpisode& episode,
                   const RelabelConfig& relabel, long t, const RelabelContext& ctx, Rng& rng);

TransitionBatch make_batch(const ReplayBuffer& buffer, const DigitFlipConfig& cfg,
                           std::span<const std::size_t> indices);
// Uniform with replacement; throws std::logic_error on an undersized buffer.
TransitionBatch sample_batch(const ReplayBuffer& buffer, const DigitFlipConfig& cfg,
                             std::size_t batch_size, Rng& rng);

// Mean td_error over every (experience, candidate goal) pair, using the
// de-duplicated pool of each experience. Empty when there are no pairs.
std::optional<double> mean_relabel_td_error(const DigitFlipConfig& cfg,
                                            const DigitFlipEpisode& episode, const QFunction& qf,
                                            double gamma);

}  // namespace gcrl
