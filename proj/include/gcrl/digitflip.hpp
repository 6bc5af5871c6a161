#pragma once

// DigitFlip(n, r): an n-digit perpetual calendar. The agent stands on one
// digit and may FLIP it (increment modulo r+1) or MOVE to the next digit
// (increment modulo n). An optional adversary acts the same way after every
// agent action.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gcrl/gmdp.hpp"
#include "gcrl/rng.hpp"

namespace gcrl {

enum class Action : int { flip = 0, move = 1 };
inline constexpr int kActionCount = 2;

inline int to_index(Action a) { return static_cast<int>(a); }
Action action_from_index(int index);
std::string to_string(Action a);

enum class AdversaryMode { none, random, competent, policy };

std::string to_string(AdversaryMode mode);
AdversaryMode adversary_mode_from_string(const std::string& name);

struct DigitFlipConfig {
  int n = 4;
  int r = 2;
  int max_steps = 0;  // agent actions per episode; 0 selects the default
  AdversaryMode adversary_mode = AdversaryMode::none;

  // 2 * n * (1 + floor((r+1)/2)): twice the worst-case optimum without an
  // adversary.
  static int default_max_steps(int n, int r);
  static DigitFlipConfig make(int n, int r, AdversaryMode mode = AdversaryMode::none);

  bool has_adversary() const { return adversary_mode != AdversaryMode::none; }
  int steps() const { return max_steps > 0 ? max_steps : default_max_steps(n, r); }

  // Throws std::invalid_argument on n < 2, r < 1 or a step budget too small
  // for the no-adversary optimum.
  void validate() const;
};

struct DigitFlipState {
  int agent_pos = 0;
  std::vector<int> digits;
  std::optional<int> adversary_pos;

  bool operator==(const DigitFlipState&) const = default;
};

struct DigitFlipGoal {
  std::vector<int> target_digits;

  bool operator==(const DigitFlipGoal&) const = default;
  auto operator<=>(const DigitFlipGoal&) const = default;
};

using DigitFlipExperience = Experience<DigitFlipState>;
using DigitFlipEpisode = Episode<DigitFlipState, DigitFlipGoal>;

bool valid_state(const DigitFlipConfig& cfg, const DigitFlipState& s);
bool valid_goal(const DigitFlipConfig& cfg, const DigitFlipGoal& g);

DigitFlipState step_agent(const DigitFlipConfig& cfg, const DigitFlipState& s, Action a);
// Throws std::logic_error if the state carries no adversary.
DigitFlipState step_adversary(const DigitFlipConfig& cfg, const DigitFlipState& s, Action a);

// Digit vectors only; positions never take part in satisfaction.
bool sat(const DigitFlipState& s, const DigitFlipGoal& g);

// Forward flips needed to turn digit `from` into digit `to`.
int flip_distance(int from, int to, int r);

// Per digit, goal + floor((r+1)/2) mod (r+1): the value farthest from the
// goal digit around the cycle of r+1 values.
DigitFlipGoal anti_goal(const DigitFlipGoal& goal, int r);

Action competent_adversary_action(const DigitFlipState& s, const DigitFlipGoal& agent_goal, int r);
Action random_adversary_action(Rng& rng);

struct ResetResult {
  DigitFlipState state;
  DigitFlipGoal goal;
};

// Uniform digits, positions and goal; the goal is resampled until the state
// does not already satisfy it.
ResetResult reset(const DigitFlipConfig& cfg, Rng& rng);

// log10(n * (r+1)^n).
double state_space_magnitude(int n, int r);

// Exchanges agent_pos and adversary_pos; digits are untouched.
DigitFlipState swap_roles(const DigitFlipState& s);

// Feature layout, all one-hot groups concatenated in this order:
//   agent_pos            n slots
//   adversary_pos        n slots (only when the config has an adversary)
//   digits[0..n)         r+1 slots each
//   goal digits[0..n)    r+1 slots each
std::size_t encoded_width(const DigitFlipConfig& cfg);
void encode_into(const DigitFlipConfig& cfg, const DigitFlipState& s, const DigitFlipGoal& g,
                 std::span<double> out);
std::vector<double> encode(const DigitFlipConfig& cfg, const DigitFlipState& s,
                           const DigitFlipGoal& g);
// Throws std::invalid_argument if the vector is not a valid encoding.
std::pair<DigitFlipState, DigitFlipGoal> decode(const DigitFlipConfig& cfg,
                                                std::span<const double> features);

// GMDP view without an adversary: deterministic step_agent transitions,
// digit-matching Sat and the binary reward.
GmdpSpec<DigitFlipState, DigitFlipGoal> digitflip_gmdp(const DigitFlipConfig& cfg);

using AdversaryFn = std::function<Action(const DigitFlipState&, const DigitFlipGoal&)>;

struct StepResult {
  DigitFlipState next_state;
  double reward = -1.0;
  bool done = false;
  bool success = false;
  std::optional<Action> adversary_action;
};

// Single-owner episode runner.
class DigitFlipEnv {
 public:
  explicit DigitFlipEnv(DigitFlipConfig cfg);

  const ResetResult& reset(Rng& rng);
  void reset_to(DigitFlipState state, DigitFlipGoal goal);

  // Agent action, then one adversary action (when the config has an
  // adversary), then reward/termination on the resulting state. Throws
  // std::logic_error once the episode is done. `adversary` must be callable
  // when the config has an adversary.
  StepResult step(Action agent_action, const AdversaryFn& adversary = {});

  const DigitFlipConfig& config() const { return cfg_; }
  const DigitFlipState& state() const { return current_.state; }
  const DigitFlipGoal& goal() const { return current_.goal; }
  int steps_taken() const { return steps_; }
  bool done() const { return done_; }

 private:
  DigitFlipConfig cfg_;
  ResetResult current_;
  int steps_ = 0;
  bool done_ = true;
};

}  // namespace gcrl
