#pragma once

// Brute-force ground truth for small DigitFlip instances. Nothing here calls
// into the environment or relabelling code: transitions, satisfaction and the
// selection loop are written out again so the two can be tested against each
// other.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "gcrl/digitflip.hpp"
#include "gcrl/rng.hpp"

namespace gcrl::oracle {

inline constexpr double kMaxStates = 1e6;
inline constexpr double kMaxAugmentedStates = 2e7;

// Throws std::length_error naming the size when n * (r+1)^n exceeds kMaxStates.
void check_size(int n, int r);

struct OracleResult {
  std::optional<int> optimal_length;  // empty when unreachable
  std::vector<Action> actions;
};

// Breadth-first search over (agent position, digits) with FLIP/MOVE edges.
OracleResult shortest_solution(int agent_pos, std::span<const int> digits,
                               std::span<const int> goal, int n, int r);

// Sum of forward flips plus the forward moves needed to reach the farthest
// position that still needs a flip.
int closed_form_length(int agent_pos, std::span<const int> digits, std::span<const int> goal,
                       int n, int r);

// Optimal Q-values of the reduced MDP over (position, digits, goal) with the
// binary reward and termination on satisfaction.
class QTable {
 public:
  QTable(int n, int r, double gamma);

  int n() const { return n_; }
  int r() const { return r_; }
  double gamma() const { return gamma_; }
  std::size_t state_count() const { return state_count_; }
  std::size_t goal_count() const { return goal_count_; }

  double q(int agent_pos, std::span<const int> digits, std::span<const int> goal, Action a) const;
  Action greedy(int agent_pos, std::span<const int> digits, std::span<const int> goal) const;

  double& at(std::size_t state, std::size_t goal, int action);
  double at(std::size_t state, std::size_t goal, int action) const;

  std::size_t state_index(int agent_pos, std::span<const int> digits) const;
  std::size_t goal_index(std::span<const int> goal) const;
  void unpack_state(std::size_t index, int& agent_pos, std::vector<int>& digits) const;
  void unpack_goal(std::size_t index, std::vector<int>& goal) const;

  int sweeps = 0;
  double residual = 0.0;

 private:
  int n_;
  int r_;
  double gamma_;
  std::size_t state_count_;
  std::size_t goal_count_;
  std::vector<double> values_;
};

// Converges to sup-norm change below tolerance.
QTable value_iteration(int n, int r, double gamma, double tolerance = 1e-10);

// Finite-horizon optimum against a uniformly random adversary: the largest
// probability of satisfying the goal within the remaining agent actions,
// where each agent action is followed by one adversary action drawn from
// {FLIP, MOVE} with equal probability and Sat is checked after the adversary.
class RandomAdversaryTable {
 public:
  RandomAdversaryTable(int n, int r, int horizon);

  int horizon() const { return horizon_; }
  double success(int agent_pos, int adversary_pos, std::span<const int> digits,
                 std::span<const int> goal, int steps_left) const;
  Action greedy(int agent_pos, int adversary_pos, std::span<const int> digits,
                std::span<const int> goal, int steps_left) const;
  // Mean of success(.., horizon) over uniform resets: positions uniform,
  // (digits, goal) uniform over unsatisfied pairs.
  double mean_success() const;

 private:
  std::size_t digit_code(std::span<const int> d) const;
  double action_value(std::size_t p, std::size_t q, std::size_t d, std::size_t g, int a,
                      int steps_left) const;

  int n_;
  int r_;
  int horizon_;
  std::size_t digit_count_;
  // values_[((k * G + g) * n + p) * n + q) * D + d], k = actions left
  std::vector<double> values_;
};

// Reference selection loop: k rounds, each drawing u ~ U[0,1) and taking the
// best-scored remaining candidate when u > mu, else a uniformly drawn
// remaining candidate. Requires at most 12 candidates.
std::vector<std::size_t> exhaustive_select(std::span<const double> scores, std::size_t k, double mu,
                                           Rng& rng);

// Columns: agent_pos,digits,goal,action,q with digit vectors written as
// dash-joined strings.
void export_q_table_csv(const QTable& table, const std::filesystem::path& path);

}  // namespace gcrl::oracle
