#pragma once

// Training loops: plain goal-conditioned DDQN, training against a fixed
// adversary, IGOAL (the adversary is a periodically refreshed frozen copy of
// the learner), the two-agent parallel variant, and construction of
// competent adversary pools.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gcrl/digitflip.hpp"
#include "gcrl/mlp.hpp"
#include "gcrl/qfunction.hpp"
#include "gcrl/relabel.hpp"
#include "gcrl/replay.hpp"
#include "gcrl/rng.hpp"

namespace gcrl {

enum class AdversaryKind { none, random, competent_greedy, snapshot, external };
std::string to_string(AdversaryKind k);

struct AdversaryPolicy {
  AdversaryKind kind = AdversaryKind::none;
  // snapshot: at most one member (empty before the first refresh);
  // external: the pool one member is drawn from per episode.
  std::vector<Mlp> pool;

  static AdversaryPolicy none() { return {}; }
  static AdversaryPolicy random() { return {AdversaryKind::random, {}}; }
  static AdversaryPolicy competent_greedy() { return {AdversaryKind::competent_greedy, {}}; }
  static AdversaryPolicy snapshot(std::optional<Mlp> net);
  static AdversaryPolicy external(std::vector<Mlp> pool);
};

// Greedy action of a snapshotted agent playing the adversary: it sees the
// state with the two positions exchanged and pursues the anti-goal of the
// agent's goal.
Action snapshot_adversary_action(const Mlp& snapshot, const DigitFlipConfig& cfg,
                                 const DigitFlipState& state, const DigitFlipGoal& agent_goal);

// Runtime adversary with its own random stream.
class Adversary {
 public:
  Adversary(DigitFlipConfig cfg, AdversaryPolicy policy, std::uint64_t seed);

  // Draws the pool member used for the coming episode (external pools).
  void begin_episode();
  Action act(const DigitFlipState& state, const DigitFlipGoal& agent_goal);
  AdversaryFn fn();

  // Switches to (or refreshes) a frozen snapshot adversary.
  void set_snapshot(Mlp snapshot);
  bool has_snapshot() const;
  const AdversaryPolicy& policy() const { return policy_; }

 private:
  DigitFlipConfig cfg_;
  AdversaryPolicy policy_;
  Rng rng_;
  std::size_t active_ = 0;
  bool warned_ = false;
};

using AgentPolicy = std::function<Action(const DigitFlipState&, const DigitFlipGoal&)>;

AgentPolicy greedy_policy(const Mlp& net, const DigitFlipConfig& cfg);

struct EvalResult {
  double success_rate = 0.0;
  std::optional<double> mean_successful_length;  // agent actions; empty without successes
  int episodes = 0;
};

// Greedy episodes on fresh resets drawn from `seed`. Never mutates the agent.
EvalResult evaluate(const AgentPolicy& agent, const DigitFlipConfig& cfg,
                    const AdversaryPolicy& adversary, int episodes, std::uint64_t seed);
EvalResult evaluate(const Mlp& agent, const DigitFlipConfig& cfg, const AdversaryPolicy& adversary,
                    int episodes, std::uint64_t seed);

struct IgoalConfig {
  long snapshot_interval = 4000;  // h
  long total_steps = 30000;
  long eval_every = 4000;
  int eval_episodes = 200;
  std::uint64_t seed = 0;
  bool track_td_error = true;

  void validate() const;
};

struct EvalRow {
  long step = 0;
  double success_rate = 0.0;
  std::optional<double> mean_successful_length;
};

struct TrainingMetrics {
  std::vector<EvalRow> evaluations;
  std::vector<std::optional<double>> episode_td_error;  // one per finished training episode
  std::vector<long> episode_end_step;                    // agent-step count when each episode ended
  long steps = 0;
  long episodes = 0;
  long snapshots_taken = 0;
};

// One goal-conditioned DDQN learner with its replay buffer and random
// streams. step() advances by exactly one agent action.
class Learner {
 public:
  Learner(DigitFlipConfig env, TrainConfig train, RelabelConfig relabel, std::uint64_t seed,
          bool track_td_error = true);

  void step(Adversary* adversary);

  long steps() const { return steps_; }
  long episodes() const { return episodes_; }
  const QFunction& q() const { return q_; }
  QFunction& q() { return q_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const DigitFlipConfig& env_config() const { return env_cfg_; }
  const TrainConfig& train_config() const { return train_; }
  const std::vector<std::optional<double>>& episode_td_error() const { return td_stream_; }
  const std::vector<long>& episode_end_steps() const { return episode_end_; }
  std::optional<double> last_loss() const { return last_loss_; }

 private:
  void finish_episode();

  DigitFlipConfig env_cfg_;
  TrainConfig train_;
  RelabelConfig relabel_;
  bool track_td_error_;
  Rng init_rng_;
  Rng reset_rng_;
  Rng act_rng_;
  Rng sample_rng_;
  Rng relabel_rng_;
  QFunction q_;
  ReplayBuffer buffer_;
  std::optional<RndPair> rnd_;
  DigitFlipEnv env_;
  DigitFlipEpisode episode_;
  std::vector<double> input_;
  long steps_ = 0;
  long episodes_ = 0;
  std::vector<std::optional<double>> td_stream_;
  std::vector<long> episode_end_;
  std::optional<double> last_loss_;
};

// Adversary faced while training.
enum class TrainingOpponent { none, random, competent_greedy, igoal };

struct TrainingResult {
  Mlp agent;
  TrainingMetrics metrics;
};

// Generic loop. The env config's adversary_mode must agree with `opponent`
// (none <-> none). Evaluations run every eval_every steps against
// `eval_adversary`.
TrainingResult train(const DigitFlipConfig& env, const TrainConfig& train_cfg,
                     const RelabelConfig& relabel, const IgoalConfig& run, TrainingOpponent opponent,
                     const AdversaryPolicy& eval_adversary);

// IGOAL: random adversary for steps [0, h), then a frozen snapshot of the
// learner refreshed at every multiple of h below total_steps. Evaluated
// against a random adversary.
TrainingResult igoal_train(const DigitFlipConfig& env, const TrainConfig& train_cfg,
                           const IgoalConfig& igoal, const RelabelConfig& relabel);

struct ParallelResult {
  TrainingResult control;  // A: trained with IGOAL
  TrainingResult learner;  // B: adversary is A's policy, refreshed every h
};

// A and B advance in lockstep. B's adversary starts as A's initial policy
// and is replaced by a copy of A's current policy at every multiple of h.
// With freeze_control, A never trains.
// Both agents are evaluated against `eval_adversary`.
ParallelResult parallel_igoal_train(const DigitFlipConfig& env, const TrainConfig& train_cfg,
                                    const IgoalConfig& igoal, const RelabelConfig& relabel,
                                    bool freeze_control = false,
                                    const AdversaryPolicy& eval_adversary = AdversaryPolicy::random());

struct CompetentPool {
  std::vector<Mlp> members;
  std::vector<double> candidate_rates;  // success vs random adversary, per candidate
  std::vector<std::uint64_t> candidate_seeds;
  int shortfall = 0;
};

// Trains `count` independent IGOAL agents (seeds derived from igoal.seed) and
// keeps those whose success rate against a random adversary over
// `eval_episodes` reaches `threshold`.
CompetentPool train_competent_adversaries(int count, const DigitFlipConfig& env,
                                          const TrainConfig& train_cfg, const IgoalConfig& igoal,
                                          const RelabelConfig& relabel, double threshold = 0.98,
                                          int eval_episodes = 200);

}  // namespace gcrl
