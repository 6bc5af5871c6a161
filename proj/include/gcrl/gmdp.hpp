#pragma once

// Goal-conditioned decision processes (GmdpSpec), their reduction to an
// ordinary MDP over (state, goal) pairs, and goal-aware reward functions.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gcrl {

template <class State>
struct Experience {
  State state;
  int action = 0;
  State next_state;
};

template <class State, class Goal>
struct Episode {
  std::vector<Experience<State>> trajectory;
  Goal goal;

  // trajectory[i].next_state == trajectory[i+1].state for all i.
  bool chained() const {
    for (std::size_t i = 0; i + 1 < trajectory.size(); ++i)
      if (!(trajectory[i].next_state == trajectory[i + 1].state)) return false;
    return true;
  }
};

struct SpaceDescriptor {
  std::string name;
  std::vector<std::size_t> shape;
  double cardinality = 0.0;  // 0 when unbounded or unknown
};

template <class State, class Goal>
struct GmdpSpec {
  using TransitionFn = std::function<State(const State&, int)>;
  using SatFn = std::function<bool(const State&, const Goal&)>;
  using RewardFn = std::function<double(const Experience<State>&, const Goal&)>;

  SpaceDescriptor state_space;
  SpaceDescriptor goal_space;
  int action_count = 1;
  TransitionFn transition;
  SatFn sat;
  RewardFn reward;

  void validate() const {
    if (action_count < 1) throw std::invalid_argument("GmdpSpec: action_count must be >= 1");
    if (!transition || !sat || !reward)
      throw std::invalid_argument("GmdpSpec: transition, sat and reward are required");
  }
};

inline double binary_reward(bool satisfied) { return satisfied ? 0.0 : -1.0; }

// 0 if the experience's next state satisfies the goal, -1 otherwise.
template <class State, class Goal, class Sat>
double binary_reward(const Experience<State>& exp, const Goal& goal, const Sat& sat) {
  return binary_reward(static_cast<bool>(sat(exp.next_state, goal)));
}

template <class State, class Goal>
typename GmdpSpec<State, Goal>::RewardFn make_binary_reward(
    typename GmdpSpec<State, Goal>::SatFn sat) {
  return [sat = std::move(sat)](const Experience<State>& exp, const Goal& goal) {
    return binary_reward(sat(exp.next_state, goal));
  };
}

// Plain MDP view over augmented states (s, g). The goal component is carried
// through every transition unchanged, and the reward of ((s,g), a, (s',g)) is
// the GMDP reward of the experience (s, a, s') under g.
template <class State, class Goal>
class ReducedMdp {
 public:
  struct AugmentedState {
    State state;
    Goal goal;
    bool operator==(const AugmentedState&) const = default;
  };
  struct Transition {
    AugmentedState next;
    double reward = 0.0;
    bool terminal = false;
  };

  explicit ReducedMdp(GmdpSpec<State, Goal> spec) : spec_(std::move(spec)) { spec_.validate(); }

  int action_count() const { return spec_.action_count; }

  double reward(const AugmentedState& from, int action, const AugmentedState& to) const {
    return spec_.reward(Experience<State>{from.state, action, to.state}, from.goal);
  }

  bool terminal(const AugmentedState& s) const { return spec_.sat(s.state, s.goal); }

  Transition step(const AugmentedState& from, int action) const {
    if (action < 0 || action >= spec_.action_count)
      throw std::out_of_range("ReducedMdp::step: action out of range");
    Transition t;
    t.next = AugmentedState{spec_.transition(from.state, action), from.goal};
    t.reward = reward(from, action, t.next);
    t.terminal = terminal(t.next);
    return t;
  }

  const GmdpSpec<State, Goal>& spec() const { return spec_; }

 private:
  GmdpSpec<State, Goal> spec_;
};

template <class State, class Goal>
ReducedMdp<State, Goal> reduce_to_mdp(GmdpSpec<State, Goal> spec) {
  return ReducedMdp<State, Goal>(std::move(spec));
}

// Distance-shaped rewards over real-vector states and goals.

enum class CreditMode { absolute, relative };

using DistanceMetric = std::function<double(std::span<const double>, std::span<const double>)>;
using CreditMap = std::function<double(double)>;

// Sum of absolute differences; |s - g| in the scalar case.
double manhattan_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

// absolute: f(-d(s', g)); relative: f(d(s, g) - d(s', g)).
double distance_reward(const Experience<std::vector<double>>& exp, std::span<const double> goal,
                       CreditMode mode, const CreditMap& f, const DistanceMetric& d);

}  // namespace gcrl
