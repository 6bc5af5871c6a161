#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gcrl/mlp.hpp"
#include "gcrl/qfunction.hpp"
#include "gcrl/rng.hpp"
#include "support.hpp"

using namespace gcrl;

namespace {

TransitionBatch one_sample_batch(std::vector<double> in, int action, double reward,
                                 std::vector<double> next, bool done) {
  TransitionBatch b;
  b.inputs = Eigen::Map<Eigen::MatrixXd>(in.data(), static_cast<Eigen::Index>(in.size()), 1);
  b.next_inputs = Eigen::Map<Eigen::MatrixXd>(next.data(), static_cast<Eigen::Index>(next.size()), 1);
  b.actions = {action};
  b.rewards = Eigen::VectorXd::Constant(1, reward);
  b.done = {static_cast<std::uint8_t>(done)};
  return b;
}

TransitionBatch random_batch(int width, int actions, int n, Rng& rng) {
  TransitionBatch b;
  b.inputs.resize(width, n);
  b.next_inputs.resize(width, n);
  b.rewards.resize(n);
  for (Eigen::Index j = 0; j < b.inputs.size(); ++j) {
    b.inputs(j) = rng.uniform(-1, 1);
    b.next_inputs(j) = rng.uniform(-1, 1);
  }
  for (int j = 0; j < n; ++j) {
    b.actions.push_back(static_cast<int>(rng.index(actions)));
    b.rewards(j) = rng.coin() ? 0.0 : -1.0;
    b.done.push_back(rng.index(4) == 0);
  }
  return b;
}

}  // namespace

TEST(Mlp, ZeroNetworkOutputsZero) {
  Mlp net({5, 7, 3});
  const std::vector<double> x = {1, -2, 3, 0.5, 9};
  EXPECT_TRUE(net.forward(x).isZero(0.0));
}

TEST(Mlp, HandBuiltSingleHiddenUnit) {
  Mlp net({1, 1, 1});
  net.layers()[0].weight(0, 0) = 2.0;
  net.layers()[0].bias(0) = -1.0;
  net.layers()[1].weight(0, 0) = 3.0;
  net.layers()[1].bias(0) = 0.5;
  EXPECT_DOUBLE_EQ(net.forward(std::vector<double>{1.0})(0), 3.5);
  EXPECT_DOUBLE_EQ(net.forward(std::vector<double>{0.0})(0), 0.5);  // hidden clipped at 0
}

TEST(Mlp, DeterministicAndBatchMatchesSingle) {
  Rng rng(1);
  const auto net = Mlp::random({6, 8, 8, 2}, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 5);
  const Eigen::MatrixXd batch = net.forward(x);
  for (int j = 0; j < 5; ++j) {
    const Eigen::VectorXd col = x.col(j);
    const auto single = net.forward(std::span<const double>(col.data(), 6));
    EXPECT_TRUE(single.isApprox(batch.col(j), 1e-12));
    EXPECT_EQ(single, net.forward(std::span<const double>(col.data(), 6)));
  }
}

TEST(Mlp, RejectsWidthMismatch) {
  Mlp net({3, 2});
  EXPECT_THROW(net.forward(std::vector<double>{1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(net.forward(Eigen::MatrixXd::Zero(4, 1)), std::invalid_argument);
}

TEST(Mlp, InitBoundsAndZeroBias) {
  Rng rng(2);
  const auto net = Mlp::random({9, 16, 4}, rng);
  const double b0 = 1.0 / 3.0, b1 = 1.0 / 4.0;
  EXPECT_LE(net.layers()[0].weight.cwiseAbs().maxCoeff(), b0);
  EXPECT_LE(net.layers()[1].weight.cwiseAbs().maxCoeff(), b1);
  EXPECT_TRUE(net.layers()[0].bias.isZero(0.0));
  EXPECT_EQ(net.parameter_count(), 9u * 16 + 16 + 16 * 4 + 4);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  for (int c = 0; c < 30; ++c) EXPECT_LT(gcrl::testing::gradient_check_case(rng), 1e-4);
}

// The loss gradient applied by sgd_update, recovered from a plain SGD step,
// against central differences of batch_loss on a 10-parameter network.
TEST(QFunction, LossGradientMatchesFiniteDifferences) {
  Rng rng(4);
  Mlp net = Mlp::random({1, 3, 1}, rng);
  ASSERT_EQ(net.parameter_count(), 10u);
  for (auto& l : net.layers()) l.bias.setConstant(0.1);
  TransitionBatch b = random_batch(1, 1, 6, rng);
  b.inputs = b.inputs.cwiseAbs() + Eigen::MatrixXd::Constant(1, 6, 0.2);
  Eigen::VectorXd y(6);
  for (int j = 0; j < 6; ++j) y(j) = rng.uniform(-2, 2);
  const double lr = 1e-3;
  QFunction qf(net, OptimizerKind::sgd, lr);
  const double h = 1e-5;
  std::vector<double> numeric;
  for (auto& layer : qf.primary().layers()) {
    auto probe = [&](double& p) {
      const double keep = p;
      p = keep + h;
      const double up = batch_loss(qf, b, y);
      p = keep - h;
      const double down = batch_loss(qf, b, y);
      p = keep;
      numeric.push_back((up - down) / (2 * h));
    };
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) probe(layer.weight(r, c));
      probe(layer.bias(r));
    }
  }
  const Mlp before = qf.primary();
  qf.sgd_update(b, y);
  std::size_t at = 0;
  for (std::size_t l = 0; l < before.layers().size(); ++l) {
    const auto& old_layer = before.layers()[l];
    const auto& new_layer = qf.primary().layers()[l];
    for (Eigen::Index r = 0; r < old_layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < old_layer.weight.cols(); ++c)
        EXPECT_LT(gcrl::testing::relative_error((old_layer.weight(r, c) - new_layer.weight(r, c)) / lr,
                                                numeric[at++]),
                  1e-4);
      EXPECT_LT(gcrl::testing::relative_error((old_layer.bias(r) - new_layer.bias(r)) / lr, numeric[at++]),
                1e-4);
    }
  }
}

TEST(QFunction, ZeroLossLeavesParametersUnchanged) {
  Rng rng(5);
  TrainConfig cfg;
  cfg.hidden = {8};
  QFunction qf(4, 2, cfg, rng);
  const auto b = random_batch(4, 2, 8, rng);
  const Eigen::MatrixXd q = qf.q_values(Network::primary, b.inputs);
  Eigen::VectorXd y(8);
  for (int j = 0; j < 8; ++j) y(j) = q(b.actions[j], j);
  const Mlp before = qf.primary();
  EXPECT_EQ(qf.sgd_update(b, y), 0.0);
  EXPECT_EQ(qf.primary(), before);
}

TEST(QFunction, RepeatedUpdatesDriveLossToZero) {
  Rng rng(6);
  TrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 1e-2;
  QFunction qf(3, 2, cfg, rng);
  const auto b = one_sample_batch({0.5, -0.2, 1.0}, 1, -1.0, {0, 0, 0}, true);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, -1.0);
  double prev = INFINITY;
  for (int s = 0; s < 1000; ++s) {
    const double loss = qf.sgd_update(b, y);
    EXPECT_LE(loss, prev + 1e-15);
    prev = loss;
  }
  EXPECT_LT(batch_loss(qf, b, y), 1e-8);
}

TEST(QFunction, NonFiniteLossAbortsWithoutTouchingParameters) {
  Rng rng(7);
  TrainConfig cfg;
  cfg.hidden = {4};
  QFunction qf(2, 2, cfg, rng);
  const auto b = one_sample_batch({1, 1}, 0, 0, {0, 0}, true);
  const Mlp before = qf.primary();
  EXPECT_THROW(qf.sgd_update(b, Eigen::VectorXd::Constant(1, NAN)), NonFiniteLoss);
  EXPECT_EQ(qf.primary(), before);
}

TEST(DdqnTargets, TerminalAndZeroDiscount) {
  Rng rng(8);
  TrainConfig cfg;
  cfg.hidden = {8};
  QFunction qf(3, 2, cfg, rng);
  const auto term = one_sample_batch({1, 0, 0}, 0, -1.0, {0, 1, 0}, true);
  EXPECT_EQ(ddqn_targets(qf, term, 0.9)(0), -1.0);
  auto b = random_batch(3, 2, 16, rng);
  const auto y = ddqn_targets(qf, b, 0.0);
  for (int j = 0; j < 16; ++j) EXPECT_EQ(y(j), b.rewards(j));
}

// Primary picks the action, target scores it.
TEST(DdqnTargets, HandSetTables) {
  Mlp primary({2, 2});  // linear: Q = W x + b
  primary.layers()[0].weight << 1.0, 0.0, 0.0, 2.0;
  QFunction qf(primary, OptimizerKind::sgd, 0.1);
  qf.target().layers()[0].weight << 5.0, 0.0, 0.0, -3.0;
  // s' = (1, 1): primary Q = (1, 2) -> argmax 1; target Q = (5, -3) -> -3.
  const auto b = one_sample_batch({0, 0}, 0, -1.0, {1, 1}, false);
  EXPECT_DOUBLE_EQ(ddqn_targets(qf, b, 0.9)(0), -1.0 + 0.9 * -3.0);
  // s' = (3, 1): primary Q = (3, 2) -> argmax 0; target Q = (15, -3) -> 15.
  const auto c = one_sample_batch({0, 0}, 0, 0.0, {3, 1}, false);
  EXPECT_DOUBLE_EQ(ddqn_targets(qf, c, 0.5)(0), 7.5);
}

TEST(Polyak, EndpointsAndArithmetic) {
  Mlp zero({1, 1});
  Mlp one({1, 1});
  one.layers()[0].weight(0, 0) = 1.0;
  one.layers()[0].bias(0) = 1.0;
  QFunction qf(one, OptimizerKind::sgd, 0.1);
  qf.target() = zero;
  qf.polyak_update(0.05);
  EXPECT_DOUBLE_EQ(qf.target().layers()[0].weight(0, 0), 0.05);
  EXPECT_DOUBLE_EQ(qf.target().layers()[0].bias(0), 0.05);
  const Mlp held = qf.target();
  qf.polyak_update(0.0);
  EXPECT_EQ(qf.target(), held);
  qf.polyak_update(1.0);
  EXPECT_EQ(qf.target(), qf.primary());
}

TEST(Polyak, DistanceContracts) {
  Rng rng(9);
  TrainConfig cfg;
  cfg.hidden = {8};
  QFunction qf(3, 2, cfg, rng);
  qf.target() = Mlp::random({3, 8, 2}, rng);
  double prev = parameter_distance_sq(qf.target(), qf.primary());
  for (double tau : {0.05, 0.3, 0.7, 0.99}) {
    qf.polyak_update(tau);
    const double d = parameter_distance_sq(qf.target(), qf.primary());
    EXPECT_LT(d, prev);
    prev = d;
  }
}

TEST(HardCopy, TargetEqualsPrimaryUntilNextUpdate) {
  Rng rng(10);
  TrainConfig cfg;
  cfg.hidden = {8};
  QFunction qf(3, 2, cfg, rng);
  qf.primary() = Mlp::random({3, 8, 2}, rng);
  qf.hard_copy();
  qf.hard_copy();
  const std::vector<double> x = {0.1, 0.2, -0.3};
  EXPECT_EQ(qf.q_values(Network::primary, x), qf.q_values(Network::target, x));
  const Mlp target = qf.target();
  auto b = random_batch(3, 2, 4, rng);
  qf.sgd_update(b, Eigen::VectorXd::Constant(4, 3.0));
  EXPECT_EQ(qf.target(), target);
  EXPECT_FALSE(qf.primary() == target);
}

TEST(Epsilon, Schedule) {
  EXPECT_EQ(epsilon(0), 1.0);
  EXPECT_DOUBLE_EQ(epsilon(1), 0.993);
  EXPECT_EQ(epsilon(10000), 0.1);
  double prev = 1.0;
  for (long e = 0; e < 2000; ++e) {
    const double v = epsilon(e);
    EXPECT_LE(v, prev);
    EXPECT_GE(v, 0.1);
    prev = v;
  }
}

TEST(Act, GreedyAndTieBreak) {
  Eigen::VectorXd q(2);
  q << 1.0, 3.0;
  EXPECT_EQ(greedy_action(q), 1);
  q << 2.0, 2.0;
  EXPECT_EQ(greedy_action(q), 0);
  Eigen::VectorXd r(4);
  r << 0.3, -1.0, 0.7, 0.7;
  for (double shift : {-100.0, 0.0, 42.5}) EXPECT_EQ(greedy_action(r.array() + shift), 2);
}

TEST(Act, EpsilonOneIsUniform) {
  Rng rng(11);
  TrainConfig cfg;
  cfg.hidden = {4};
  QFunction qf(2, 2, cfg, rng);
  const std::vector<double> x = {1.0, 0.0};
  int ones = 0;
  for (int i = 0; i < 100000; ++i) ones += act(qf, x, 1.0, rng);
  EXPECT_NEAR(ones / 1e5, 0.5, 0.01);
  const int g = greedy_action(qf.q_values(Network::primary, x));
  for (int i = 0; i < 100; ++i) EXPECT_EQ(act(qf, x, 0.0, rng), g);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.tau = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.gamma = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.epsilon_decay = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  EXPECT_EQ(cfg.learning_rate, 5e-4);
  EXPECT_EQ(cfg.gamma, 0.9);
  EXPECT_EQ(cfg.tau, 0.05);
  EXPECT_EQ(cfg.batch_size, 64);
  EXPECT_EQ(cfg.buffer_capacity, 2'000'000u);
  EXPECT_EQ(cfg.target_copy_interval, 4000);
}

TEST(Snapshot, RoundTripIsBitExact) {
  Rng rng(12);
  const auto net = Mlp::random({7, 5, 3, 2}, rng);
  std::stringstream buf;
  write_mlp(buf, net);
  EXPECT_EQ(buf.str().size(), 4u + 3 * 8 + 8 * net.parameter_count());
  const auto back = read_mlp(buf);
  EXPECT_EQ(back, net);

  const auto dir = std::filesystem::temp_directory_path() / "gcrl_snapshot_test";
  std::filesystem::create_directories(dir);
  std::vector<Mlp> pool = {net, Mlp::random({7, 5, 3, 2}, rng)};
  save_pool(dir / "pool.bin", pool);
  const auto loaded = load_pool(dir / "pool.bin");
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0], pool[0]);
  EXPECT_EQ(loaded[1], pool[1]);
  std::filesystem::remove_all(dir);
}

TEST(Snapshot, LittleEndianHeader) {
  Mlp net({3, 2});
  net.layers()[0].weight(0, 0) = 1.0;
  std::stringstream buf;
  write_mlp(buf, net);
  const std::string s = buf.str();
  const unsigned char* p = reinterpret_cast<const unsigned char*>(s.data());
  EXPECT_EQ(p[0], 1);  // one layer
  EXPECT_EQ(p[4], 2);  // out
  EXPECT_EQ(p[8], 3);  // in
  double w0;
  std::memcpy(&w0, s.data() + 12, 8);
  EXPECT_EQ(w0, 1.0);
}

TEST(Snapshot, RejectsTruncatedInput) {
  std::stringstream buf("\x02\x00\x00\x00\x01");
  EXPECT_THROW(read_mlp(buf), std::runtime_error);
}
