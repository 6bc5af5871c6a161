#include "gcrl/trainer.hpp"

#include <stdexcept>

#include "gcrl/log.hpp"

namespace gcrl {

namespace {

// Stream ids for derive_seed.
constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamReset = 2;
constexpr std::uint64_t kStreamAct = 3;
constexpr std::uint64_t kStreamSample = 4;
constexpr std::uint64_t kStreamRelabel = 5;
constexpr std::uint64_t kStreamTrainAdversary = 11;
constexpr std::uint64_t kStreamControlAdversary = 12;
constexpr std::uint64_t kStreamParallelLearner = 77;
constexpr std::uint64_t kStreamEvalAdversary = 101;
constexpr std::uint64_t kStreamCompetentCandidate = 5000;
constexpr std::uint64_t kStreamCompetentEval = 6000;
constexpr std::uint64_t kStreamEval = 1'000'000;

}  // namespace

std::string to_string(AdversaryKind k) {
  switch (k) {
    case AdversaryKind::none: return "none";
    case AdversaryKind::random: return "random";
    case AdversaryKind::competent_greedy: return "competent_greedy";
    case AdversaryKind::snapshot: return "snapshot";
    case AdversaryKind::external: return "external";
  }
  return "none";
}

AdversaryPolicy AdversaryPolicy::snapshot(std::optional<Mlp> net) {
  AdversaryPolicy p{AdversaryKind::snapshot, {}};
  if (net) p.pool.push_back(std::move(*net));
  return p;
}

AdversaryPolicy AdversaryPolicy::external(std::vector<Mlp> pool) {
  if (pool.empty()) throw std::invalid_argument("external adversary pool is empty");
  return {AdversaryKind::external, std::move(pool)};
}

Action snapshot_adversary_action(const Mlp& snapshot, const DigitFlipConfig& cfg,
                                 const DigitFlipState& state, const DigitFlipGoal& agent_goal) {
  const auto input = encode(cfg, swap_roles(state), anti_goal(agent_goal, cfg.r));
  return action_from_index(greedy_action(snapshot.forward(input)));
}

Adversary::Adversary(DigitFlipConfig cfg, AdversaryPolicy policy, std::uint64_t seed)
    : cfg_(std::move(cfg)), policy_(std::move(policy)), rng_(seed) {
  if (policy_.kind == AdversaryKind::external && policy_.pool.empty())
    throw std::invalid_argument("Adversary: external pool is empty");
}

void Adversary::begin_episode() {
  if (policy_.kind == AdversaryKind::external) active_ = rng_.index(policy_.pool.size());
}

Action Adversary::act(const DigitFlipState& state, const DigitFlipGoal& agent_goal) {
  switch (policy_.kind) {
    case AdversaryKind::none:
      throw std::logic_error("Adversary::act: no adversary configured");
    case AdversaryKind::random:
      return random_adversary_action(rng_);
    case AdversaryKind::competent_greedy:
      return competent_adversary_action(state, agent_goal, cfg_.r);
    case AdversaryKind::snapshot:
      if (policy_.pool.empty()) {
        if (!warned_) {
          log_warning("snapshot adversary has no snapshot yet; acting randomly");
          warned_ = true;
        }
        return random_adversary_action(rng_);
      }
      return snapshot_adversary_action(policy_.pool.front(), cfg_, state, agent_goal);
    case AdversaryKind::external:
      return snapshot_adversary_action(policy_.pool[active_], cfg_, state, agent_goal);
  }
  throw std::logic_error("Adversary::act: unknown kind");
}

AdversaryFn Adversary::fn() {
  return [this](const DigitFlipState& s, const DigitFlipGoal& g) { return act(s, g); };
}

void Adversary::set_snapshot(Mlp snapshot) {
  policy_.kind = AdversaryKind::snapshot;
  policy_.pool.assign(1, std::move(snapshot));
}

bool Adversary::has_snapshot() const {
  return policy_.kind == AdversaryKind::snapshot && !policy_.pool.empty();
}

AgentPolicy greedy_policy(const Mlp& net, const DigitFlipConfig& cfg) {
  return [&net, cfg, input = std::vector<double>(encoded_width(cfg))](
             const DigitFlipState& s, const DigitFlipGoal& g) mutable {
    encode_into(cfg, s, g, input);
    return action_from_index(greedy_action(net.forward(input)));
  };
}

EvalResult evaluate(const AgentPolicy& agent, const DigitFlipConfig& cfg,
                    const AdversaryPolicy& adversary, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  if (cfg.has_adversary() != (adversary.kind != AdversaryKind::none))
    throw std::invalid_argument("evaluate: adversary policy does not match the environment");
  Rng rng(seed);
  Adversary adv(cfg, adversary, derive_seed(seed, kStreamEvalAdversary));
  const AdversaryFn adv_fn = cfg.has_adversary() ? adv.fn() : AdversaryFn{};
  DigitFlipEnv env(cfg);
  int successes = 0;
  long total_length = 0;
  for (int e = 0; e < episodes; ++e) {
    env.reset(rng);
    adv.begin_episode();
    while (!env.done()) {
      const auto result = env.step(agent(env.state(), env.goal()), adv_fn);
      if (result.success) {
        ++successes;
        total_length += env.steps_taken();
      }
    }
  }
  EvalResult out;
  out.episodes = episodes;
  out.success_rate = static_cast<double>(successes) / episodes;
  if (successes > 0) out.mean_successful_length = static_cast<double>(total_length) / successes;
  return out;
}

EvalResult evaluate(const Mlp& agent, const DigitFlipConfig& cfg, const AdversaryPolicy& adversary,
                    int episodes, std::uint64_t seed) {
  return evaluate(greedy_policy(agent, cfg), cfg, adversary, episodes, seed);
}

void IgoalConfig::validate() const {
  if (snapshot_interval < 1) throw std::invalid_argument("snapshot interval h must be >= 1");
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (snapshot_interval > total_steps) throw std::invalid_argument("h must be <= total_steps");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be > 0");
  if (eval_episodes < 1) throw std::invalid_argument("eval_episodes must be >= 1");
}

Learner::Learner(DigitFlipConfig env, TrainConfig train, RelabelConfig relabel, std::uint64_t seed,
                 bool track_td_error)
    : env_cfg_(std::move(env)),
      train_(std::move(train)),
      relabel_(std::move(relabel)),
      track_td_error_(track_td_error),
      init_rng_(derive_seed(seed, kStreamInit)),
      reset_rng_(derive_seed(seed, kStreamReset)),
      act_rng_(derive_seed(seed, kStreamAct)),
      sample_rng_(derive_seed(seed, kStreamSample)),
      relabel_rng_(derive_seed(seed, kStreamRelabel)),
      q_(static_cast<int>(encoded_width(env_cfg_)), kActionCount, train_, init_rng_),
      buffer_(make_replay_buffer(env_cfg_, train_.buffer_capacity)),
      env_(env_cfg_),
      input_(encoded_width(env_cfg_)) {
  train_.validate();
  if (relabel_.strategy == RelabelStrategy::cher)
    rnd_.emplace(static_cast<int>(encoded_width(env_cfg_)), RndConfig{}, init_rng_);
}

void Learner::step(Adversary* adversary) {
  if (env_.done()) {
    env_.reset(reset_rng_);
    if (adversary) adversary->begin_episode();
    episode_.trajectory.clear();
    episode_.goal = env_.goal();
  }
  encode_into(env_cfg_, env_.state(), env_.goal(), input_);
  const double eps =
      epsilon(episodes_, train_.epsilon_start, train_.epsilon_floor, train_.epsilon_decay);
  const int action = act(q_, input_, eps, act_rng_);
  DigitFlipState before = env_.state();
  const auto result =
      env_.step(action_from_index(action), adversary ? adversary->fn() : AdversaryFn{});
  episode_.trajectory.push_back({std::move(before), action, result.next_state});
  ++steps_;

  if (buffer_.size() >= train_.warmup_transitions) {
    for (int u = 0; u < train_.updates_per_env_step; ++u) {
      const auto batch = sample_batch(buffer_, env_cfg_, train_.batch_size, sample_rng_);
      const auto targets = ddqn_targets(q_, batch, train_.gamma);
      last_loss_ = q_.sgd_update(batch, targets);
      if (train_.use_polyak) q_.polyak_update(train_.tau);
    }
  }
  if (train_.use_hard_copy && steps_ % train_.target_copy_interval == 0) q_.hard_copy();
  if (result.done) finish_episode();
}

void Learner::finish_episode() {
  if (track_td_error_)
    td_stream_.push_back(mean_relabel_td_error(env_cfg_, episode_, q_, train_.gamma));
  episode_end_.push_back(steps_);
  RelabelContext ctx{&q_, rnd_ ? &*rnd_ : nullptr, train_.gamma};
  store_episode(buffer_, env_cfg_, episode_, relabel_, steps_, ctx, relabel_rng_);
  ++episodes_;
}

namespace {

AdversaryPolicy opponent_policy(TrainingOpponent opponent) {
  switch (opponent) {
    case TrainingOpponent::none: return AdversaryPolicy::none();
    case TrainingOpponent::random: return AdversaryPolicy::random();
    case TrainingOpponent::competent_greedy: return AdversaryPolicy::competent_greedy();
    case TrainingOpponent::igoal: return AdversaryPolicy::snapshot(std::nullopt);
  }
  return AdversaryPolicy::none();
}

EvalRow evaluation_row(const Learner& learner, const DigitFlipConfig& env,
                       const AdversaryPolicy& eval_adversary, const IgoalConfig& run,
                       long eval_index) {
  const auto r = evaluate(learner.q().primary(), env, eval_adversary, run.eval_episodes,
                          derive_seed(run.seed, kStreamEval + static_cast<std::uint64_t>(eval_index)));
  return {learner.steps(), r.success_rate, r.mean_successful_length};
}

}  // namespace

TrainingResult train(const DigitFlipConfig& env, const TrainConfig& train_cfg,
                     const RelabelConfig& relabel, const IgoalConfig& run, TrainingOpponent opponent,
                     const AdversaryPolicy& eval_adversary) {
  env.validate();
  run.validate();
  if (env.has_adversary() != (opponent != TrainingOpponent::none))
    throw std::invalid_argument("train: opponent does not match the environment's adversary mode");
  Learner learner(env, train_cfg, relabel, run.seed, run.track_td_error);
  std::optional<Adversary> adversary;
  if (opponent != TrainingOpponent::none)
    adversary.emplace(env, opponent_policy(opponent), derive_seed(run.seed, kStreamTrainAdversary));

  TrainingMetrics metrics;
  long eval_index = 0;
  while (learner.steps() < run.total_steps) {
    learner.step(adversary ? &*adversary : nullptr);
    const long t = learner.steps();
    if (opponent == TrainingOpponent::igoal && t % run.snapshot_interval == 0 &&
        t < run.total_steps) {
      adversary->set_snapshot(learner.q().primary());
      ++metrics.snapshots_taken;
    }
    if (t % run.eval_every == 0)
      metrics.evaluations.push_back(evaluation_row(learner, env, eval_adversary, run, eval_index++));
  }
  metrics.steps = learner.steps();
  metrics.episodes = learner.episodes();
  metrics.episode_td_error = learner.episode_td_error();
  metrics.episode_end_step = learner.episode_end_steps();
  return {learner.q().primary(), std::move(metrics)};
}

TrainingResult igoal_train(const DigitFlipConfig& env, const TrainConfig& train_cfg,
                           const IgoalConfig& igoal, const RelabelConfig& relabel) {
  if (!env.has_adversary())
    throw std::invalid_argument("igoal_train: environment has no adversary slot");
  return train(env, train_cfg, relabel, igoal, TrainingOpponent::igoal, AdversaryPolicy::random());
}

ParallelResult parallel_igoal_train(const DigitFlipConfig& env, const TrainConfig& train_cfg,
                                    const IgoalConfig& igoal, const RelabelConfig& relabel,
                                    bool freeze_control, const AdversaryPolicy& eval_adversary) {
  env.validate();
  igoal.validate();
  if (!env.has_adversary())
    throw std::invalid_argument("parallel_igoal_train: environment has no adversary slot");
  Learner control(env, train_cfg, relabel, igoal.seed, igoal.track_td_error);
  Learner learner(env, train_cfg, relabel, derive_seed(igoal.seed, kStreamParallelLearner),
                  igoal.track_td_error);
  Adversary control_adversary(env, AdversaryPolicy::snapshot(std::nullopt),
                              derive_seed(igoal.seed, kStreamTrainAdversary));
  Adversary learner_adversary(env, AdversaryPolicy::snapshot(control.q().primary()),
                              derive_seed(igoal.seed, kStreamControlAdversary));

  ParallelResult out;
  long eval_index = 0;
  for (long t = 1; t <= igoal.total_steps; ++t) {
    if (!freeze_control) control.step(&control_adversary);
    learner.step(&learner_adversary);
    if (t % igoal.snapshot_interval == 0 && t < igoal.total_steps) {
      if (!freeze_control) {
        control_adversary.set_snapshot(control.q().primary());
        ++out.control.metrics.snapshots_taken;
      }
      learner_adversary.set_snapshot(control.q().primary());
      ++out.learner.metrics.snapshots_taken;
    }
    if (t % igoal.eval_every == 0) {
      auto a_row = evaluation_row(control, env, eval_adversary, igoal, eval_index);
      a_row.step = t;
      out.control.metrics.evaluations.push_back(a_row);
      out.learner.metrics.evaluations.push_back(
          evaluation_row(learner, env, eval_adversary, igoal, eval_index));
      ++eval_index;
    }
  }
  for (auto* pair : {&out.control, &out.learner}) {
    const Learner& l = pair == &out.control ? control : learner;
    pair->agent = l.q().primary();
    pair->metrics.steps = l.steps();
    pair->metrics.episodes = l.episodes();
    pair->metrics.episode_td_error = l.episode_td_error();
    pair->metrics.episode_end_step = l.episode_end_steps();
  }
  return out;
}

CompetentPool train_competent_adversaries(int count, const DigitFlipConfig& env,
                                          const TrainConfig& train_cfg, const IgoalConfig& igoal,
                                          const RelabelConfig& relabel, double threshold,
                                          int eval_episodes) {
  if (count < 1) throw std::invalid_argument("train_competent_adversaries: count must be >= 1");
  CompetentPool pool;
  for (int c = 0; c < count; ++c) {
    IgoalConfig run = igoal;
    run.seed = derive_seed(igoal.seed, kStreamCompetentCandidate + static_cast<std::uint64_t>(c));
    auto result = igoal_train(env, train_cfg, run, relabel);
    const double rate = evaluate(result.agent, env, AdversaryPolicy::random(), eval_episodes,
                                 derive_seed(run.seed, kStreamCompetentEval))
                            .success_rate;
    pool.candidate_rates.push_back(rate);
    pool.candidate_seeds.push_back(run.seed);
    if (rate >= threshold) pool.members.push_back(std::move(result.agent));
  }
  pool.shortfall = count - static_cast<int>(pool.members.size());
  if (pool.shortfall > 0)
    log_warning("competent adversary pool: " + std::to_string(pool.shortfall) + " of " +
                std::to_string(count) + " candidates below the competence threshold");
  return pool;
}

}  // namespace gcrl
