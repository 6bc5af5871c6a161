#pragma once

// Checks shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <vector>

#include "gcrl/digitflip.hpp"
#include "gcrl/mlp.hpp"
#include "gcrl/oracle.hpp"
#include "gcrl/qfunction.hpp"
#include "gcrl/relabel.hpp"
#include "gcrl/rng.hpp"

namespace gcrl::testing {

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / scale;
}

// Smallest |pre-activation| over the hidden units for a batch; finite
// differences are meaningless next to a ReLU kink.
inline double min_hidden_preactivation(const Mlp& net, const Eigen::MatrixXd& x) {
  double smallest = INFINITY;
  Eigen::MatrixXd a = x;
  const auto& layers = net.layers();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    Eigen::MatrixXd z = layers[i].weight * a;
    z.colwise() += layers[i].bias;
    smallest = std::min(smallest, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return smallest;
}

// Objective sum(w .* net(x)) for random weights w; returns the largest
// relative error between backward() and central differences (step 1e-5)
// over every parameter of one random small network.
inline double gradient_check_case(Rng& rng) {
  std::vector<int> sizes{1 + static_cast<int>(rng.index(6))};
  const int hidden_layers = 1 + static_cast<int>(rng.index(2));
  for (int h = 0; h < hidden_layers; ++h) sizes.push_back(1 + static_cast<int>(rng.index(6)));
  sizes.push_back(1 + static_cast<int>(rng.index(3)));
  Mlp net = Mlp::random(sizes, rng);
  for (auto& layer : net.layers())
    for (Eigen::Index j = 0; j < layer.bias.size(); ++j) layer.bias(j) = rng.uniform(-0.5, 0.5);
  const int batch = 1 + static_cast<int>(rng.index(4));
  Eigen::MatrixXd x(sizes.front(), batch);
  do {
    for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = rng.uniform(-2.0, 2.0);
  } while (min_hidden_preactivation(net, x) < 1e-3);
  Eigen::MatrixXd w(sizes.back(), batch);
  for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = rng.uniform(-1.0, 1.0);

  auto objective = [&](const Mlp& m) { return (m.forward(x).array() * w.array()).sum(); };
  Mlp::Cache cache;
  net.forward(x, &cache);
  const Gradients g = net.backward(cache, w);

  const double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = objective(net);
    param = keep - h;
    const double down = objective(net);
    param = keep;
    worst = std::max(worst, relative_error(analytic, (up - down) / (2 * h)));
  };
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) probe(layer.weight(r, c), g.weight[l](r, c));
      probe(layer.bias(r), g.bias[l](r));
    }
  }
  return worst;
}

inline Trajectory random_trajectory(const DigitFlipConfig& cfg, std::size_t length, Rng& rng) {
  Trajectory traj;
  DigitFlipState s = reset(cfg, rng).state;
  for (std::size_t t = 0; t < length; ++t) {
    const Action a = action_from_index(static_cast<int>(rng.index(2)));
    DigitFlipState next = step_agent(cfg, s, a);
    if (cfg.has_adversary()) next = step_adversary(cfg, next, random_adversary_action(rng));
    traj.push_back({s, to_index(a), next});
    s = next;
  }
  return traj;
}

// Candidate pool re-derived by scanning the suffix directly, duplicates
// collapsed in first-seen order.
inline std::vector<DigitFlipGoal> scan_pool(const Trajectory& traj, std::size_t i) {
  std::vector<DigitFlipGoal> pool;
  for (std::size_t j = i; j < traj.size(); ++j) {
    DigitFlipGoal g{traj[j].next_state.digits};
    if (std::find(pool.begin(), pool.end(), g) == pool.end()) pool.push_back(g);
  }
  return pool;
}

struct SelectionTrial {
  bool eher_match = true;
  bool cher_match = true;
  std::size_t pool_size = 0;
};

// One differential trial on a random trajectory: eher_select and cher_select
// against the oracle's selection loop fed the same RNG state and scores
// computed one goal at a time.
inline SelectionTrial selection_trial(Rng& rng, const QFunction& qf, RndPair& rnd,
                                      const DigitFlipConfig& cfg) {
  SelectionTrial out;
  const std::size_t length = 1 + rng.index(12);
  const Trajectory traj = random_trajectory(cfg, length, rng);
  const std::size_t i = rng.index(length);
  const auto pool = scan_pool(traj, i);
  out.pool_size = pool.size();
  const std::size_t k = 1 + rng.index(pool.size() + 1);
  static constexpr MixinKind kinds[] = {MixinKind::constant_zero, MixinKind::constant_half,
                                        MixinKind::constant_one, MixinKind::linear_increasing,
                                        MixinKind::linear_decreasing};
  const MixinSchedule schedule{kinds[rng.index(5)], 1000};
  const long t = static_cast<long>(rng.index(1200));
  const double mu = mixin_probability(schedule, t);
  const double gamma = 0.9;

  std::vector<double> td(pool.size()), novelty(pool.size());
  for (std::size_t j = 0; j < pool.size(); ++j) {
    td[j] = td_error(qf, cfg, traj[i], pool[j], gamma);
    novelty[j] = rnd.novelty_error(encode(cfg, traj[i].next_state, pool[j]));
  }

  const std::uint64_t seed = rng.next();
  auto check = [&](const std::vector<RelabelEntry>& got, const std::vector<double>& scores) {
    Rng ref_rng(seed);
    const auto order = oracle::exhaustive_select(scores, k, mu, ref_rng);
    if (got.size() != order.size()) return false;
    for (std::size_t j = 0; j < order.size(); ++j) {
      if (!(got[j].goal == pool[order[j]])) return false;
      if (got[j].reward != (traj[i].next_state.digits == pool[order[j]].target_digits ? 0.0 : -1.0))
        return false;
    }
    return true;
  };
  Rng eher_rng(seed);
  out.eher_match = check(eher_select(cfg, traj, i, k, schedule, t, qf, gamma, eher_rng), td);
  Rng cher_rng(seed);
  out.cher_match = check(cher_select(cfg, traj, i, k, schedule, t, rnd, cher_rng), novelty);
  return out;
}

}  // namespace gcrl::testing
