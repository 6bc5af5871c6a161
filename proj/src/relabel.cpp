#include "gcrl/relabel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gcrl/log.hpp"

namespace gcrl {

std::string to_string(RelabelStrategy s) {
  switch (s) {
    case RelabelStrategy::none: return "none";
    case RelabelStrategy::her: return "her";
    case RelabelStrategy::eher: return "eher";
    case RelabelStrategy::cher: return "cher";
  }
  return "none";
}

RelabelStrategy relabel_strategy_from_string(const std::string& name) {
  if (name == "none") return RelabelStrategy::none;
  if (name == "her") return RelabelStrategy::her;
  if (name == "eher") return RelabelStrategy::eher;
  if (name == "cher") return RelabelStrategy::cher;
  throw std::invalid_argument("unknown relabel strategy '" + name + "'");
}

std::string to_string(MixinKind k) {
  switch (k) {
    case MixinKind::constant_half: return "constant_half";
    case MixinKind::constant_zero: return "constant_zero";
    case MixinKind::constant_one: return "constant_one";
    case MixinKind::linear_increasing: return "linear_increasing";
    case MixinKind::linear_decreasing: return "linear_decreasing";
  }
  return "constant_half";
}

MixinKind mixin_kind_from_string(const std::string& name) {
  if (name == "constant_half") return MixinKind::constant_half;
  if (name == "constant_zero") return MixinKind::constant_zero;
  if (name == "constant_one") return MixinKind::constant_one;
  if (name == "linear_increasing") return MixinKind::linear_increasing;
  if (name == "linear_decreasing") return MixinKind::linear_decreasing;
  throw std::invalid_argument("unknown mix-in schedule '" + name + "'");
}

double mixin_probability(const MixinSchedule& schedule, long t) {
  if (t < 0) throw std::invalid_argument("mixin_probability: negative step");
  const double frac =
      schedule.horizon > 0 ? static_cast<double>(t) / static_cast<double>(schedule.horizon) : 1.0;
  switch (schedule.kind) {
    case MixinKind::constant_half: return 0.5;
    case MixinKind::constant_zero: return 0.0;
    case MixinKind::constant_one: return 1.0;
    case MixinKind::linear_increasing: return std::min(1.0, frac);
    case MixinKind::linear_decreasing: return std::max(0.0, 1.0 - frac);
  }
  return 0.5;
}

std::vector<DigitFlipGoal> candidate_goals(const Trajectory& trajectory, std::size_t i) {
  if (i >= trajectory.size()) throw std::out_of_range("candidate_goals: index past trajectory");
  std::vector<DigitFlipGoal> goals;
  goals.reserve(trajectory.size() - i);
  // Under digit-matching Sat each next state satisfies exactly one goal.
  for (std::size_t j = i; j < trajectory.size(); ++j)
    goals.push_back(DigitFlipGoal{trajectory[j].next_state.digits});
  return goals;
}

std::vector<DigitFlipGoal> unique_goals(const std::vector<DigitFlipGoal>& goals) {
  std::vector<DigitFlipGoal> out;
  for (const auto& g : goals)
    if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
  return out;
}

std::vector<double> td_errors(const QFunction& qf, const DigitFlipConfig& cfg,
                              const DigitFlipExperience& exp, std::span<const DigitFlipGoal> goals,
                              double gamma) {
  const auto width = static_cast<Eigen::Index>(encoded_width(cfg));
  const auto n = static_cast<Eigen::Index>(goals.size());
  if (n == 0) return {};
  Eigen::MatrixXd inputs(width, n);
  Eigen::MatrixXd next_inputs(width, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    encode_into(cfg, exp.state, goals[j], {inputs.col(j).data(), static_cast<std::size_t>(width)});
    encode_into(cfg, exp.next_state, goals[j],
                {next_inputs.col(j).data(), static_cast<std::size_t>(width)});
  }
  const Eigen::MatrixXd q = qf.q_values(Network::primary, inputs);
  const Eigen::MatrixXd q_next = qf.q_values(Network::primary, next_inputs);
  std::vector<double> out(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double reward = binary_reward(sat(exp.next_state, goals[j]));
    out[j] = std::abs(reward + gamma * q_next.col(j).maxCoeff() - q(exp.action, j));
  }
  return out;
}

double td_error(const QFunction& qf, const DigitFlipConfig& cfg, const DigitFlipExperience& exp,
                const DigitFlipGoal& goal, double gamma) {
  return td_errors(qf, cfg, exp, std::span<const DigitFlipGoal>(&goal, 1), gamma).front();
}

std::vector<std::size_t> prioritised_pick_order(std::span<const double> scores, std::size_t k,
                                                double mu, Rng& rng) {
  std::vector<std::size_t> remaining(scores.size());
  for (std::size_t j = 0; j < remaining.size(); ++j) remaining[j] = j;
  k = std::min(k, remaining.size());
  std::vector<std::size_t> picks;
  picks.reserve(k);
  while (picks.size() < k) {
    std::size_t at = 0;
    if (rng.uniform() > mu) {
      for (std::size_t j = 1; j < remaining.size(); ++j)
        if (scores[remaining[j]] > scores[remaining[at]]) at = j;
    } else {
      at = rng.index(remaining.size());
    }
    picks.push_back(remaining[at]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(at));
  }
  return picks;
}

namespace {

std::vector<RelabelEntry> entries_for(const DigitFlipExperience& exp,
                                      const std::vector<DigitFlipGoal>& pool,
                                      const std::vector<std::size_t>& picks) {
  std::vector<RelabelEntry> out;
  out.reserve(picks.size());
  for (std::size_t p : picks)
    out.push_back({pool[p], binary_reward(sat(exp.next_state, pool[p]))});
  return out;
}

std::vector<DigitFlipGoal> selection_pool(const Trajectory& trajectory, std::size_t i) {
  auto pool = unique_goals(candidate_goals(trajectory, i));
  if (pool.empty()) log_warning("relabel: empty candidate pool");
  return pool;
}

}  // namespace

std::vector<RelabelEntry> eher_select(const DigitFlipConfig& cfg, const Trajectory& trajectory,
                                      std::size_t i, std::size_t k, const MixinSchedule& schedule,
                                      long t, const QFunction& qf, double gamma, Rng& rng) {
  const auto pool = selection_pool(trajectory, i);
  const double mu = mixin_probability(schedule, t);
  // Scores are only consulted on greedy picks; skip the forward passes when
  // every pick is random.
  std::vector<double> scores(pool.size(), 0.0);
  if (mu < 1.0) scores = td_errors(qf, cfg, trajectory[i], pool, gamma);
  return entries_for(trajectory[i], pool, prioritised_pick_order(scores, k, mu, rng));
}

std::vector<RelabelEntry> her_select(const DigitFlipConfig&, const Trajectory& trajectory,
                                     std::size_t i, std::size_t k, Rng& rng) {
  const auto pool = selection_pool(trajectory, i);
  const std::vector<double> scores(pool.size(), 0.0);
  return entries_for(trajectory[i], pool, prioritised_pick_order(scores, k, 1.0, rng));
}

namespace {

std::vector<int> rnd_sizes(int input_width, const RndConfig& cfg) {
  std::vector<int> sizes{input_width};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(cfg.output_width);
  return sizes;
}

}  // namespace

RndPair::RndPair(int input_width, const RndConfig& cfg, Rng& rng)
    : target_(Mlp::random(rnd_sizes(input_width, cfg), rng)),
      predict_(Mlp::random(rnd_sizes(input_width, cfg), rng)),
      optimizer_(OptimizerKind::adam, cfg.learning_rate, predict_) {}

double RndPair::novelty_error(std::span<const double> input) const {
  return (target_.forward(input) - predict_.forward(input)).squaredNorm();
}

Eigen::VectorXd RndPair::novelty_errors(const Eigen::MatrixXd& inputs) const {
  return (target_.forward(inputs) - predict_.forward(inputs)).colwise().squaredNorm().transpose();
}

double RndPair::train(const Eigen::MatrixXd& inputs) {
  if (inputs.cols() == 0) return 0.0;
  Mlp::Cache cache;
  const Eigen::MatrixXd out = predict_.forward(inputs, &cache);
  const Eigen::MatrixXd diff = out - target_.forward(inputs);
  const double n = static_cast<double>(inputs.cols());
  const double loss = diff.colwise().squaredNorm().sum() / n;
  optimizer_.step(predict_, predict_.backward(cache, (2.0 / n) * diff));
  return loss;
}

std::vector<RelabelEntry> cher_select(const DigitFlipConfig& cfg, const Trajectory& trajectory,
                                      std::size_t i, std::size_t k, const MixinSchedule& schedule,
                                      long t, RndPair& rnd, Rng& rng) {
  const auto pool = selection_pool(trajectory, i);
  if (pool.empty()) return {};
  const auto width = static_cast<Eigen::Index>(encoded_width(cfg));
  const auto& next_state = trajectory[i].next_state;
  Eigen::MatrixXd inputs(width, static_cast<Eigen::Index>(pool.size()));
  for (std::size_t j = 0; j < pool.size(); ++j)
    encode_into(cfg, next_state, pool[j], {inputs.col(j).data(), static_cast<std::size_t>(width)});
  const Eigen::VectorXd novelty = rnd.novelty_errors(inputs);
  const std::vector<double> scores(novelty.data(), novelty.data() + novelty.size());
  const auto picks = prioritised_pick_order(scores, k, mixin_probability(schedule, t), rng);
  Eigen::MatrixXd selected(width, static_cast<Eigen::Index>(picks.size()));
  for (std::size_t j = 0; j < picks.size(); ++j) selected.col(j) = inputs.col(picks[j]);
  rnd.train(selected);
  return entries_for(trajectory[i], pool, picks);
}

std::size_t state_code_length(const DigitFlipConfig& cfg) {
  return static_cast<std::size_t>(cfg.n) + (cfg.has_adversary() ? 2 : 1);
}

std::vector<std::uint8_t> state_code(const DigitFlipConfig& cfg, const DigitFlipState& s) {
  std::vector<std::uint8_t> code;
  code.reserve(state_code_length(cfg));
  code.push_back(static_cast<std::uint8_t>(s.agent_pos));
  if (cfg.has_adversary()) code.push_back(static_cast<std::uint8_t>(s.adversary_pos.value()));
  for (int d : s.digits) code.push_back(static_cast<std::uint8_t>(d));
  return code;
}

std::vector<std::uint8_t> goal_code(const DigitFlipGoal& g) {
  return {g.target_digits.begin(), g.target_digits.end()};
}

DigitFlipState state_from_code(const DigitFlipConfig& cfg, std::span<const std::uint8_t> code) {
  if (code.size() != state_code_length(cfg)) throw std::invalid_argument("state_from_code: length");
  DigitFlipState s;
  std::size_t at = 0;
  s.agent_pos = code[at++];
  if (cfg.has_adversary()) s.adversary_pos = code[at++];
  s.digits.assign(code.begin() + static_cast<std::ptrdiff_t>(at), code.end());
  return s;
}

DigitFlipGoal goal_from_code(std::span<const std::uint8_t> code) {
  return DigitFlipGoal{{code.begin(), code.end()}};
}

ReplayBuffer make_replay_buffer(const DigitFlipConfig& cfg, std::size_t capacity) {
  return ReplayBuffer(capacity, state_code_length(cfg), static_cast<std::size_t>(cfg.n));
}

void store_episode(ReplayBuffer& buffer, const DigitFlipConfig& cfg, const DigitFlipEpisode& episode,
                   const RelabelConfig& relabel, long t, const RelabelContext& ctx, Rng& rng) {
  const auto& trajectory = episode.trajectory;
  const auto true_goal = goal_code(episode.goal);
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto& exp = trajectory[i];
    const auto s = state_code(cfg, exp.state);
    const auto s_next = state_code(cfg, exp.next_state);
    const bool reached = sat(exp.next_state, episode.goal);
    buffer.push(s, exp.action, binary_reward(reached), s_next, true_goal, reached);
    if (relabel.k == 0 || relabel.strategy == RelabelStrategy::none) continue;

    std::vector<RelabelEntry> entries;
    switch (relabel.strategy) {
      case RelabelStrategy::her:
        entries = her_select(cfg, trajectory, i, relabel.k, rng);
        break;
      case RelabelStrategy::eher:
        if (!ctx.qf) throw std::invalid_argument("store_episode: eher needs a Q-function");
        entries = eher_select(cfg, trajectory, i, relabel.k, relabel.schedule, t, *ctx.qf,
                              ctx.gamma, rng);
        break;
      case RelabelStrategy::cher:
        if (!ctx.rnd) throw std::invalid_argument("store_episode: cher needs an RND pair");
        entries = cher_select(cfg, trajectory, i, relabel.k, relabel.schedule, t, *ctx.rnd, rng);
        break;
      case RelabelStrategy::none: break;
    }
    for (const auto& e : entries) {
      const bool done = sat(exp.next_state, e.goal);
      buffer.push(s, exp.action, e.reward, s_next, goal_code(e.goal), done);
    }
  }
}

TransitionBatch make_batch(const ReplayBuffer& buffer, const DigitFlipConfig& cfg,
                           std::span<const std::size_t> indices) {
  const auto width = static_cast<Eigen::Index>(encoded_width(cfg));
  const auto n = static_cast<Eigen::Index>(indices.size());
  TransitionBatch batch;
  batch.inputs.resize(width, n);
  batch.next_inputs.resize(width, n);
  batch.rewards.resize(n);
  batch.actions.resize(n);
  batch.done.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto t = buffer.at(indices[j]);
    const auto goal = goal_from_code(t.goal);
    encode_into(cfg, state_from_code(cfg, t.state), goal,
                {batch.inputs.col(j).data(), static_cast<std::size_t>(width)});
    encode_into(cfg, state_from_code(cfg, t.next_state), goal,
                {batch.next_inputs.col(j).data(), static_cast<std::size_t>(width)});
    batch.rewards(j) = t.reward;
    batch.actions[j] = t.action;
    batch.done[j] = t.done ? 1 : 0;
  }
  return batch;
}

TransitionBatch sample_batch(const ReplayBuffer& buffer, const DigitFlipConfig& cfg,
                             std::size_t batch_size, Rng& rng) {
  const auto idx = buffer.sample_indices(batch_size, rng);
  return make_batch(buffer, cfg, idx);
}

std::optional<double> mean_relabel_td_error(const DigitFlipConfig& cfg,
                                            const DigitFlipEpisode& episode, const QFunction& qf,
                                            double gamma) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < episode.trajectory.size(); ++i) {
    const auto pool = unique_goals(candidate_goals(episode.trajectory, i));
    for (double e : td_errors(qf, cfg, episode.trajectory[i], pool, gamma)) {
      total += e;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

}  // namespace gcrl
