#include "gcrl/digitflip.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gcrl {

Action action_from_index(int index) {
  if (index == 0) return Action::flip;
  if (index == 1) return Action::move;
  throw std::out_of_range("action index " + std::to_string(index));
}

std::string to_string(Action a) { return a == Action::flip ? "FLIP" : "MOVE"; }

std::string to_string(AdversaryMode mode) {
  switch (mode) {
    case AdversaryMode::none: return "none";
    case AdversaryMode::random: return "random";
    case AdversaryMode::competent: return "competent";
    case AdversaryMode::policy: return "policy";
  }
  return "none";
}

AdversaryMode adversary_mode_from_string(const std::string& name) {
  if (name == "none") return AdversaryMode::none;
  if (name == "random") return AdversaryMode::random;
  if (name == "competent") return AdversaryMode::competent;
  if (name == "policy") return AdversaryMode::policy;
  throw std::invalid_argument("unknown adversary mode '" + name + "'");
}

int DigitFlipConfig::default_max_steps(int n, int r) { return 2 * n * (1 + (r + 1) / 2); }

DigitFlipConfig DigitFlipConfig::make(int n, int r, AdversaryMode mode) {
  DigitFlipConfig cfg;
  cfg.n = n;
  cfg.r = r;
  cfg.max_steps = default_max_steps(n, r);
  cfg.adversary_mode = mode;
  cfg.validate();
  return cfg;
}

void DigitFlipConfig::validate() const {
  if (n < 2) throw std::invalid_argument("DigitFlip: n must be >= 2");
  if (r < 1) throw std::invalid_argument("DigitFlip: r must be >= 1");
  if (max_steps < 0) throw std::invalid_argument("DigitFlip: max_steps must be positive");
}

bool valid_state(const DigitFlipConfig& cfg, const DigitFlipState& s) {
  if (s.agent_pos < 0 || s.agent_pos >= cfg.n) return false;
  if (static_cast<int>(s.digits.size()) != cfg.n) return false;
  for (int d : s.digits)
    if (d < 0 || d > cfg.r) return false;
  if (cfg.has_adversary() != s.adversary_pos.has_value()) return false;
  if (s.adversary_pos && (*s.adversary_pos < 0 || *s.adversary_pos >= cfg.n)) return false;
  return true;
}

bool valid_goal(const DigitFlipConfig& cfg, const DigitFlipGoal& g) {
  if (static_cast<int>(g.target_digits.size()) != cfg.n) return false;
  return std::all_of(g.target_digits.begin(), g.target_digits.end(),
                     [&](int d) { return d >= 0 && d <= cfg.r; });
}

namespace {

void apply(const DigitFlipConfig& cfg, int& pos, std::vector<int>& digits, Action a) {
  if (a == Action::flip) {
    digits[pos] = (digits[pos] + 1) % (cfg.r + 1);
  } else {
    pos = (pos + 1) % cfg.n;
  }
}

}  // namespace

DigitFlipState step_agent(const DigitFlipConfig& cfg, const DigitFlipState& s, Action a) {
  DigitFlipState next = s;
  apply(cfg, next.agent_pos, next.digits, a);
  return next;
}

DigitFlipState step_adversary(const DigitFlipConfig& cfg, const DigitFlipState& s, Action a) {
  if (!s.adversary_pos) throw std::logic_error("step_adversary: state has no adversary");
  DigitFlipState next = s;
  apply(cfg, *next.adversary_pos, next.digits, a);
  return next;
}

bool sat(const DigitFlipState& s, const DigitFlipGoal& g) { return s.digits == g.target_digits; }

int flip_distance(int from, int to, int r) { return ((to - from) % (r + 1) + (r + 1)) % (r + 1); }

DigitFlipGoal anti_goal(const DigitFlipGoal& goal, int r) {
  DigitFlipGoal anti = goal;
  const int shift = (r + 1) / 2;
  for (int& d : anti.target_digits) d = (d + shift) % (r + 1);
  return anti;
}

Action competent_adversary_action(const DigitFlipState& s, const DigitFlipGoal& agent_goal,
                                  int r) {
  if (!s.adversary_pos) throw std::logic_error("competent_adversary_action: no adversary");
  const int pos = *s.adversary_pos;
  const int shift = (r + 1) / 2;
  const int anti = (agent_goal.target_digits.at(pos) + shift) % (r + 1);
  return s.digits[pos] != anti ? Action::flip : Action::move;
}

Action random_adversary_action(Rng& rng) { return rng.coin() ? Action::flip : Action::move; }

ResetResult reset(const DigitFlipConfig& cfg, Rng& rng) {
  ResetResult out;
  out.state.digits.resize(cfg.n);
  for (int& d : out.state.digits) d = static_cast<int>(rng.index(cfg.r + 1));
  out.state.agent_pos = static_cast<int>(rng.index(cfg.n));
  if (cfg.has_adversary()) out.state.adversary_pos = static_cast<int>(rng.index(cfg.n));
  out.goal.target_digits.resize(cfg.n);
  do {
    for (int& d : out.goal.target_digits) d = static_cast<int>(rng.index(cfg.r + 1));
  } while (sat(out.state, out.goal));
  return out;
}

double state_space_magnitude(int n, int r) {
  return std::log10(static_cast<double>(n)) + n * std::log10(static_cast<double>(r + 1));
}

DigitFlipState swap_roles(const DigitFlipState& s) {
  if (!s.adversary_pos) throw std::logic_error("swap_roles: state has no adversary");
  DigitFlipState out = s;
  std::swap(out.agent_pos, *out.adversary_pos);
  return out;
}

std::size_t encoded_width(const DigitFlipConfig& cfg) {
  const std::size_t n = cfg.n;
  const std::size_t positions = cfg.has_adversary() ? 2 * n : n;
  return positions + 2 * n * static_cast<std::size_t>(cfg.r + 1);
}

void encode_into(const DigitFlipConfig& cfg, const DigitFlipState& s, const DigitFlipGoal& g,
                 std::span<double> out) {
  if (out.size() != encoded_width(cfg)) throw std::invalid_argument("encode: output width");
  std::fill(out.begin(), out.end(), 0.0);
  std::size_t offset = 0;
  out[offset + s.agent_pos] = 1.0;
  offset += cfg.n;
  if (cfg.has_adversary()) {
    if (!s.adversary_pos) throw std::invalid_argument("encode: adversary position missing");
    out[offset + *s.adversary_pos] = 1.0;
    offset += cfg.n;
  }
  const std::size_t group = cfg.r + 1;
  for (int i = 0; i < cfg.n; ++i) out[offset + i * group + s.digits[i]] = 1.0;
  offset += cfg.n * group;
  for (int i = 0; i < cfg.n; ++i) out[offset + i * group + g.target_digits[i]] = 1.0;
}

std::vector<double> encode(const DigitFlipConfig& cfg, const DigitFlipState& s,
                           const DigitFlipGoal& g) {
  std::vector<double> out(encoded_width(cfg));
  encode_into(cfg, s, g, out);
  return out;
}

namespace {

int read_one_hot(std::span<const double> slots) {
  int hot = -1;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i] == 1.0) {
      if (hot >= 0) throw std::invalid_argument("decode: more than one hot slot");
      hot = static_cast<int>(i);
    } else if (slots[i] != 0.0) {
      throw std::invalid_argument("decode: slot value is neither 0 nor 1");
    }
  }
  if (hot < 0) throw std::invalid_argument("decode: no hot slot");
  return hot;
}

}  // namespace

std::pair<DigitFlipState, DigitFlipGoal> decode(const DigitFlipConfig& cfg,
                                                std::span<const double> features) {
  if (features.size() != encoded_width(cfg)) throw std::invalid_argument("decode: width");
  DigitFlipState s;
  DigitFlipGoal g;
  std::size_t offset = 0;
  s.agent_pos = read_one_hot(features.subspan(offset, cfg.n));
  offset += cfg.n;
  if (cfg.has_adversary()) {
    s.adversary_pos = read_one_hot(features.subspan(offset, cfg.n));
    offset += cfg.n;
  }
  const std::size_t group = cfg.r + 1;
  s.digits.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i) s.digits[i] = read_one_hot(features.subspan(offset + i * group, group));
  offset += cfg.n * group;
  g.target_digits.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i)
    g.target_digits[i] = read_one_hot(features.subspan(offset + i * group, group));
  return {std::move(s), std::move(g)};
}

GmdpSpec<DigitFlipState, DigitFlipGoal> digitflip_gmdp(const DigitFlipConfig& cfg) {
  cfg.validate();
  DigitFlipConfig plain = cfg;
  plain.adversary_mode = AdversaryMode::none;
  GmdpSpec<DigitFlipState, DigitFlipGoal> spec;
  const double cardinality = std::pow(10.0, state_space_magnitude(cfg.n, cfg.r));
  spec.state_space = {"digitflip-state", {static_cast<std::size_t>(cfg.n) + 1}, cardinality};
  spec.goal_space = {"digitflip-goal", {static_cast<std::size_t>(cfg.n)},
                     std::pow(static_cast<double>(cfg.r + 1), cfg.n)};
  spec.action_count = kActionCount;
  spec.transition = [plain](const DigitFlipState& s, int a) {
    return step_agent(plain, s, action_from_index(a));
  };
  spec.sat = [](const DigitFlipState& s, const DigitFlipGoal& g) { return sat(s, g); };
  spec.reward = make_binary_reward<DigitFlipState, DigitFlipGoal>(spec.sat);
  return spec;
}

DigitFlipEnv::DigitFlipEnv(DigitFlipConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

const ResetResult& DigitFlipEnv::reset(Rng& rng) {
  current_ = gcrl::reset(cfg_, rng);
  steps_ = 0;
  done_ = false;
  return current_;
}

void DigitFlipEnv::reset_to(DigitFlipState state, DigitFlipGoal goal) {
  if (!valid_state(cfg_, state) || !valid_goal(cfg_, goal))
    throw std::invalid_argument("DigitFlipEnv::reset_to: invalid state or goal");
  current_ = {std::move(state), std::move(goal)};
  steps_ = 0;
  done_ = false;
}

StepResult DigitFlipEnv::step(Action agent_action, const AdversaryFn& adversary) {
  if (done_) throw std::logic_error("DigitFlipEnv::step: episode is done");
  StepResult out;
  out.next_state = step_agent(cfg_, current_.state, agent_action);
  if (cfg_.has_adversary()) {
    if (!adversary) throw std::logic_error("DigitFlipEnv::step: adversary policy missing");
    const Action adv = adversary(out.next_state, current_.goal);
    out.next_state = step_adversary(cfg_, out.next_state, adv);
    out.adversary_action = adv;
  }
  ++steps_;
  out.success = sat(out.next_state, current_.goal);
  out.reward = binary_reward(out.success);
  out.done = out.success || steps_ >= cfg_.steps();
  current_.state = out.next_state;
  done_ = out.done;
  return out;
}

}  // namespace gcrl
