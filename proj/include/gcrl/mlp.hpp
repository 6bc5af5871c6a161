#pragma once

// Fully-connected network with ReLU hidden layers and a linear output layer.
// Batches are column-major: one sample per column.

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "gcrl/rng.hpp"

namespace gcrl {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
};

class Mlp {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // input, hidden outputs, network output
  };

  Mlp() = default;
  // All-zero parameters. sizes = {input, hidden..., output}.
  explicit Mlp(const std::vector<int>& sizes);
  // Weights uniform in +-1/sqrt(fan_in), biases zero.
  static Mlp random(const std::vector<int>& sizes, Rng& rng);

  std::vector<int> sizes() const;
  int input_width() const;
  int output_width() const;
  std::size_t parameter_count() const;

  Eigen::VectorXd forward(std::span<const double> input) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, Cache* cache = nullptr) const;

  // Parameter gradient of sum(output_grad .* output) for the batch in `cache`.
  Gradients backward(const Cache& cache, const Eigen::MatrixXd& output_grad) const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  bool same_shape(const Mlp& other) const;
  bool operator==(const Mlp& other) const;

 private:
  std::vector<DenseLayer> layers_;
};

Gradients zero_gradients_like(const Mlp& net);

// target := (1 - tau) * target + tau * source, elementwise.
void polyak_blend(Mlp& target, const Mlp& source, double tau);

// Squared L2 distance between the parameter vectors of two equally shaped nets.
double parameter_distance_sq(const Mlp& a, const Mlp& b);

enum class OptimizerKind { sgd, adam };

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, double learning_rate, const Mlp& shape);

  void step(Mlp& net, const Gradients& grad);

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return learning_rate_; }

 private:
  OptimizerKind kind_ = OptimizerKind::adam;
  double learning_rate_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double epsilon_ = 1e-8;
  long steps_ = 0;
  Gradients first_;
  Gradients second_;
};

// Snapshot format: little-endian int32 layer count, then (out, in) int32
// pairs per layer, then per layer the row-major float64 weights followed by
// the float64 biases.
void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);
void save_mlp(const std::filesystem::path& path, const Mlp& net);
Mlp load_mlp(const std::filesystem::path& path);

// Pool file: little-endian int32 member count followed by the members'
// snapshot records back to back.
void save_pool(const std::filesystem::path& path, const std::vector<Mlp>& pool);
std::vector<Mlp> load_pool(const std::filesystem::path& path);

}  // namespace gcrl
