#include "gcrl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

namespace gcrl::oracle {

namespace {

double power(int base, int exp) { return std::pow(static_cast<double>(base), exp); }

std::string joined(std::span<const int> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace

void check_size(int n, int r) {
  if (n < 1 || r < 1) throw std::invalid_argument("oracle: n and r must be positive");
  const double size = n * power(r + 1, n);
  if (size > kMaxStates)
    throw std::length_error("oracle: state space of " + std::to_string(static_cast<long long>(size)) +
                            " exceeds the limit of " + std::to_string(static_cast<long long>(kMaxStates)));
}

OracleResult shortest_solution(int agent_pos, std::span<const int> digits,
                               std::span<const int> goal, int n, int r) {
  check_size(n, r);
  if (static_cast<int>(digits.size()) != n || static_cast<int>(goal.size()) != n)
    throw std::invalid_argument("shortest_solution: vector length != n");
  const int base = r + 1;
  const std::size_t configs = static_cast<std::size_t>(power(base, n));
  auto pack = [&](int pos, const std::vector<int>& d) {
    std::size_t code = 0;
    for (int i = n - 1; i >= 0; --i) code = code * base + d[i];
    return static_cast<std::size_t>(pos) * configs + code;
  };
  auto unpack = [&](std::size_t id, int& pos, std::vector<int>& d) {
    pos = static_cast<int>(id / configs);
    std::size_t code = id % configs;
    d.resize(n);
    for (int i = 0; i < n; ++i) {
      d[i] = static_cast<int>(code % base);
      code /= base;
    }
  };
  const std::vector<int> target(goal.begin(), goal.end());
  std::vector<int> start(digits.begin(), digits.end());
  OracleResult out;
  if (start == target) {
    out.optimal_length = 0;
    return out;
  }

  const std::size_t total = static_cast<std::size_t>(n) * configs;
  constexpr std::size_t kUnseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> parent(total, kUnseen);
  std::vector<std::uint8_t> via(total, 0);
  const std::size_t root = pack(agent_pos, start);
  parent[root] = root;
  std::deque<std::size_t> frontier{root};
  std::vector<int> d;
  while (!frontier.empty()) {
    const std::size_t id = frontier.front();
    frontier.pop_front();
    int pos = 0;
    unpack(id, pos, d);
    for (int action = 0; action < 2; ++action) {
      std::vector<int> nd = d;
      int npos = pos;
      if (action == 0) nd[pos] = nd[pos] == r ? 0 : nd[pos] + 1;
      else npos = pos + 1 == n ? 0 : pos + 1;
      const std::size_t next = pack(npos, nd);
      if (parent[next] != kUnseen) continue;
      parent[next] = id;
      via[next] = static_cast<std::uint8_t>(action);
      if (nd == target) {
        for (std::size_t at = next; at != root; at = parent[at])
          out.actions.push_back(via[at] == 0 ? Action::flip : Action::move);
        std::reverse(out.actions.begin(), out.actions.end());
        out.optimal_length = static_cast<int>(out.actions.size());
        return out;
      }
      frontier.push_back(next);
    }
  }
  return out;
}

int closed_form_length(int agent_pos, std::span<const int> digits, std::span<const int> goal,
                       int n, int r) {
  int flips = 0;
  int farthest = 0;
  for (int i = 0; i < n; ++i) {
    const int need = ((goal[i] - digits[i]) % (r + 1) + (r + 1)) % (r + 1);
    if (need == 0) continue;
    flips += need;
    farthest = std::max(farthest, ((i - agent_pos) % n + n) % n);
  }
  return flips + farthest;
}

QTable::QTable(int n, int r, double gamma) : n_(n), r_(r), gamma_(gamma) {
  check_size(n, r);
  goal_count_ = static_cast<std::size_t>(power(r + 1, n));
  state_count_ = static_cast<std::size_t>(n) * goal_count_;
  if (static_cast<double>(state_count_) * static_cast<double>(goal_count_) > kMaxAugmentedStates)
    throw std::length_error("oracle: augmented state space of " +
                            std::to_string(state_count_ * goal_count_) + " is too large");
  values_.assign(state_count_ * goal_count_ * 2, 0.0);
}

std::size_t QTable::state_index(int agent_pos, std::span<const int> digits) const {
  return static_cast<std::size_t>(agent_pos) * goal_count_ + goal_index(digits);
}

std::size_t QTable::goal_index(std::span<const int> goal) const {
  std::size_t code = 0;
  for (int i = n_ - 1; i >= 0; --i) code = code * (r_ + 1) + goal[i];
  return code;
}

void QTable::unpack_goal(std::size_t index, std::vector<int>& goal) const {
  goal.resize(n_);
  for (int i = 0; i < n_; ++i) {
    goal[i] = static_cast<int>(index % (r_ + 1));
    index /= (r_ + 1);
  }
}

void QTable::unpack_state(std::size_t index, int& agent_pos, std::vector<int>& digits) const {
  agent_pos = static_cast<int>(index / goal_count_);
  unpack_goal(index % goal_count_, digits);
}

double& QTable::at(std::size_t state, std::size_t goal, int action) {
  return values_[(state * goal_count_ + goal) * 2 + action];
}

double QTable::at(std::size_t state, std::size_t goal, int action) const {
  return values_[(state * goal_count_ + goal) * 2 + action];
}

double QTable::q(int agent_pos, std::span<const int> digits, std::span<const int> goal,
                 Action a) const {
  return at(state_index(agent_pos, digits), goal_index(goal), a == Action::flip ? 0 : 1);
}

Action QTable::greedy(int agent_pos, std::span<const int> digits, std::span<const int> goal) const {
  const std::size_t s = state_index(agent_pos, digits);
  const std::size_t g = goal_index(goal);
  return at(s, g, 1) > at(s, g, 0) ? Action::move : Action::flip;
}

QTable value_iteration(int n, int r, double gamma, double tolerance) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("value_iteration: gamma");
  QTable table(n, r, gamma);
  const std::size_t states = table.state_count();
  const std::size_t goals = table.goal_count();

  // Successor state index for each (state, action), precomputed.
  std::vector<std::size_t> successor(states * 2);
  std::vector<std::size_t> digits_of(states);
  std::vector<int> d;
  for (std::size_t s = 0; s < states; ++s) {
    int pos = 0;
    table.unpack_state(s, pos, d);
    digits_of[s] = table.goal_index(d);
    std::vector<int> flipped = d;
    flipped[pos] = (flipped[pos] + 1) % (r + 1);
    successor[s * 2 + 0] = table.state_index(pos, flipped);
    successor[s * 2 + 1] = table.state_index((pos + 1) % n, d);
  }

  std::vector<double> next_values;
  for (table.sweeps = 1;; ++table.sweeps) {
    double change = 0.0;
    for (std::size_t s = 0; s < states; ++s) {
      for (std::size_t g = 0; g < goals; ++g) {
        for (int a = 0; a < 2; ++a) {
          const std::size_t next = successor[s * 2 + a];
          double value;
          if (digits_of[next] == g) {
            value = 0.0;  // reached: reward 0, terminal
          } else {
            value = -1.0 + gamma * std::max(table.at(next, g, 0), table.at(next, g, 1));
          }
          change = std::max(change, std::abs(value - table.at(s, g, a)));
          table.at(s, g, a) = value;
        }
      }
    }
    table.residual = change;
    if (change < tolerance) break;
  }
  return table;
}

std::vector<std::size_t> exhaustive_select(std::span<const double> scores, std::size_t k, double mu,
                                           Rng& rng) {
  if (scores.size() > 12) throw std::invalid_argument("exhaustive_select: at most 12 candidates");
  std::vector<bool> taken(scores.size(), false);
  std::size_t left = scores.size();
  std::vector<std::size_t> order;
  while (order.size() < k && left > 0) {
    std::size_t choice = scores.size();
    if (rng.uniform() > mu) {
      for (std::size_t j = 0; j < scores.size(); ++j) {
        if (taken[j]) continue;
        if (choice == scores.size() || scores[j] > scores[choice]) choice = j;
      }
    } else {
      std::size_t skip = rng.index(left);
      for (std::size_t j = 0; j < scores.size(); ++j) {
        if (taken[j]) continue;
        if (skip-- == 0) {
          choice = j;
          break;
        }
      }
    }
    taken[choice] = true;
    --left;
    order.push_back(choice);
  }
  return order;
}

void export_q_table_csv(const QTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "agent_pos,digits,goal,action,q\n";
  out.precision(17);
  std::vector<int> d, g;
  for (std::size_t s = 0; s < table.state_count(); ++s) {
    int pos = 0;
    table.unpack_state(s, pos, d);
    for (std::size_t gi = 0; gi < table.goal_count(); ++gi) {
      table.unpack_goal(gi, g);
      for (int a = 0; a < 2; ++a)
        out << pos << ',' << joined(d) << ',' << joined(g) << ',' << (a == 0 ? "FLIP" : "MOVE")
            << ',' << table.at(s, gi, a) << '\n';
    }
  }
}

RandomAdversaryTable::RandomAdversaryTable(int n, int r, int horizon)
    : n_(n), r_(r), horizon_(horizon) {
  check_size(n, r);
  if (horizon < 0) throw std::invalid_argument("RandomAdversaryTable: negative horizon");
  digit_count_ = static_cast<std::size_t>(power(r + 1, n));
  const double cells = (horizon + 1.0) * digit_count_ * digit_count_ * n * n;
  if (cells > kMaxAugmentedStates * 4)
    throw std::length_error("oracle: random-adversary table of " +
                            std::to_string(static_cast<long long>(cells)) + " entries is too large");
  values_.assign(static_cast<std::size_t>(cells), 0.0);
  const std::size_t nn = static_cast<std::size_t>(n);
  for (int k = 1; k <= horizon; ++k)
    for (std::size_t g = 0; g < digit_count_; ++g)
      for (std::size_t p = 0; p < nn; ++p)
        for (std::size_t q = 0; q < nn; ++q)
          for (std::size_t d = 0; d < digit_count_; ++d) {
            const double v = std::max(action_value(p, q, d, g, 0, k), action_value(p, q, d, g, 1, k));
            values_[(((static_cast<std::size_t>(k) * digit_count_ + g) * nn + p) * nn + q) * digit_count_ + d] = v;
          }
}

std::size_t RandomAdversaryTable::digit_code(std::span<const int> d) const {
  if (static_cast<int>(d.size()) != n_) throw std::invalid_argument("RandomAdversaryTable: vector length != n");
  std::size_t code = 0;
  for (int i = n_ - 1; i >= 0; --i) {
    if (d[i] < 0 || d[i] > r_) throw std::invalid_argument("RandomAdversaryTable: digit out of range");
    code = code * static_cast<std::size_t>(r_ + 1) + static_cast<std::size_t>(d[i]);
  }
  return code;
}

// Expected success of taking agent action a (0 flip, 1 move) now and acting
// optimally afterwards.
double RandomAdversaryTable::action_value(std::size_t p, std::size_t q, std::size_t d, std::size_t g,
                                          int a, int steps_left) const {
  const std::size_t nn = static_cast<std::size_t>(n_);
  const std::size_t base = static_cast<std::size_t>(r_ + 1);
  auto flip = [&](std::size_t code, std::size_t pos) {
    std::size_t place = 1;
    for (std::size_t i = 0; i < pos; ++i) place *= base;
    const std::size_t digit = (code / place) % base;
    return code - digit * place + ((digit + 1) % base) * place;
  };
  std::size_t p1 = p, d1 = d;
  if (a == 0) d1 = flip(d, p);
  else p1 = (p + 1) % nn;
  double total = 0.0;
  for (int b = 0; b < 2; ++b) {
    std::size_t q2 = q, d2 = d1;
    if (b == 0) d2 = flip(d1, q);
    else q2 = (q + 1) % nn;
    if (d2 == g) {
      total += 0.5;
    } else if (steps_left > 1) {
      total += 0.5 * values_[(((static_cast<std::size_t>(steps_left - 1) * digit_count_ + g) * nn + p1) * nn + q2) *
                                 digit_count_ + d2];
    }
  }
  return total;
}

double RandomAdversaryTable::success(int agent_pos, int adversary_pos, std::span<const int> digits,
                                     std::span<const int> goal, int steps_left) const {
  if (steps_left < 0 || steps_left > horizon_)
    throw std::out_of_range("RandomAdversaryTable: steps_left outside [0, horizon]");
  const std::size_t d = digit_code(digits), g = digit_code(goal);
  if (d == g) return 1.0;
  const std::size_t nn = static_cast<std::size_t>(n_);
  return values_[(((static_cast<std::size_t>(steps_left) * digit_count_ + g) * nn +
                   static_cast<std::size_t>(agent_pos)) * nn + static_cast<std::size_t>(adversary_pos)) *
                     digit_count_ + d];
}

Action RandomAdversaryTable::greedy(int agent_pos, int adversary_pos, std::span<const int> digits,
                                    std::span<const int> goal, int steps_left) const {
  if (steps_left < 1 || steps_left > horizon_)
    throw std::out_of_range("RandomAdversaryTable: steps_left outside [1, horizon]");
  const std::size_t p = static_cast<std::size_t>(agent_pos), q = static_cast<std::size_t>(adversary_pos);
  const std::size_t d = digit_code(digits), g = digit_code(goal);
  return action_value(p, q, d, g, 1, steps_left) > action_value(p, q, d, g, 0, steps_left) ? Action::move
                                                                                         : Action::flip;
}

double RandomAdversaryTable::mean_success() const {
  const std::size_t nn = static_cast<std::size_t>(n_);
  double total = 0.0;
  for (std::size_t g = 0; g < digit_count_; ++g)
    for (std::size_t pq = 0; pq < nn * nn; ++pq)
      for (std::size_t d = 0; d < digit_count_; ++d)
        if (d != g)
          total += values_[((static_cast<std::size_t>(horizon_) * digit_count_ + g) * nn * nn + pq) *
                               digit_count_ + d];
  return total / (static_cast<double>(digit_count_) * (digit_count_ - 1) * nn * nn);
}

}  // namespace gcrl::oracle
