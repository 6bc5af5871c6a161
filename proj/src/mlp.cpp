#include "gcrl/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace gcrl {

Mlp::Mlp(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp: need input and output sizes");
  for (int s : sizes)
    if (s < 1) throw std::invalid_argument("Mlp: layer sizes must be positive");
  layers_.reserve(sizes.size() - 1);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    layers_.push_back({Eigen::MatrixXd::Zero(sizes[i + 1], sizes[i]),
                       Eigen::VectorXd::Zero(sizes[i + 1])});
  }
}

Mlp Mlp::random(const std::vector<int>& sizes, Rng& rng) {
  Mlp net(sizes);
  for (auto& layer : net.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        layer.weight(r, c) = rng.uniform(-bound, bound);
  }
  return net;
}

std::vector<int> Mlp::sizes() const {
  std::vector<int> out;
  if (layers_.empty()) return out;
  out.push_back(static_cast<int>(layers_.front().weight.cols()));
  for (const auto& layer : layers_) out.push_back(static_cast<int>(layer.weight.rows()));
  return out;
}

int Mlp::input_width() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int Mlp::output_width() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

std::size_t Mlp::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers_) count += layer.weight.size() + layer.bias.size();
  return count;
}

Eigen::VectorXd Mlp::forward(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_width())
    throw std::invalid_argument("Mlp::forward: input width " + std::to_string(input.size()) +
                                " != " + std::to_string(input_width()));
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(input.data(), input.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::VectorXd z = layers_[i].weight * a + layers_[i].bias;
    a = (i + 1 < layers_.size()) ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs, Cache* cache) const {
  if (inputs.rows() != input_width())
    throw std::invalid_argument("Mlp::forward: input width " + std::to_string(inputs.rows()) +
                                " != " + std::to_string(input_width()));
  if (cache) {
    cache->activations.resize(layers_.size() + 1);
    cache->activations[0] = inputs;
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::MatrixXd z(layers_[i].weight.rows(), a.cols());
    z.noalias() = layers_[i].weight * a;
    z.colwise() += layers_[i].bias;
    if (i + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
    if (cache) cache->activations[i + 1] = a;
  }
  return a;
}

Gradients Mlp::backward(const Cache& cache, const Eigen::MatrixXd& output_grad) const {
  if (cache.activations.size() != layers_.size() + 1)
    throw std::invalid_argument("Mlp::backward: cache does not match network");
  Gradients g;
  g.weight.resize(layers_.size());
  g.bias.resize(layers_.size());
  Eigen::MatrixXd delta = output_grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Eigen::MatrixXd& input = cache.activations[k];
    g.weight[k].noalias() = delta * input.transpose();
    g.bias[k] = delta.rowwise().sum();
    if (k == 0) break;
    Eigen::MatrixXd upstream(layers_[k].weight.cols(), delta.cols());
    upstream.noalias() = layers_[k].weight.transpose() * delta;
    // ReLU derivative: the stored activation is positive exactly where the
    // pre-activation was.
    delta = (input.array() > 0.0).select(upstream, 0.0);
  }
  return g;
}

bool Mlp::same_shape(const Mlp& other) const { return sizes() == other.sizes(); }

bool Mlp::operator==(const Mlp& other) const {
  if (!same_shape(other)) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].weight != other.layers_[i].weight) return false;
    if (layers_[i].bias != other.layers_[i].bias) return false;
  }
  return true;
}

Gradients zero_gradients_like(const Mlp& net) {
  Gradients g;
  for (const auto& layer : net.layers()) {
    g.weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return g;
}

void polyak_blend(Mlp& target, const Mlp& source, double tau) {
  if (!target.same_shape(source)) throw std::invalid_argument("polyak_blend: shape mismatch");
  auto& t = target.layers();
  const auto& s = source.layers();
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i].weight = (1.0 - tau) * t[i].weight + tau * s[i].weight;
    t[i].bias = (1.0 - tau) * t[i].bias + tau * s[i].bias;
  }
}

double parameter_distance_sq(const Mlp& a, const Mlp& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("parameter_distance_sq: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.layers().size(); ++i) {
    d += (a.layers()[i].weight - b.layers()[i].weight).squaredNorm();
    d += (a.layers()[i].bias - b.layers()[i].bias).squaredNorm();
  }
  return d;
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, const Mlp& shape)
    : kind_(kind), learning_rate_(learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("Optimizer: learning rate must be > 0");
  if (kind_ == OptimizerKind::adam) {
    first_ = zero_gradients_like(shape);
    second_ = zero_gradients_like(shape);
  }
}

void Optimizer::step(Mlp& net, const Gradients& grad) {
  auto& layers = net.layers();
  if (grad.weight.size() != layers.size()) throw std::invalid_argument("Optimizer: shape mismatch");
  if (kind_ == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight -= learning_rate_ * grad.weight[i];
      layers[i].bias -= learning_rate_ * grad.bias[i];
    }
    return;
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  const double step = learning_rate_ * std::sqrt(c2) / c1;
  const double eps = epsilon_ * std::sqrt(c2);
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    param.array() -= step * m.array() / (v.array().sqrt() + eps);
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weight, first_.weight[i], second_.weight[i], grad.weight[i]);
    update(layers[i].bias, first_.bias[i], second_.bias[i], grad.bias[i]);
  }
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("snapshot: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("snapshot: truncated body");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

constexpr std::uint32_t kMaxLayers = 64;
constexpr std::uint32_t kMaxWidth = 1u << 20;

}  // namespace

void write_mlp(std::ostream& out, const Mlp& net) {
  const auto& layers = net.layers();
  put_u32(out, static_cast<std::uint32_t>(layers.size()));
  for (const auto& layer : layers) {
    put_u32(out, static_cast<std::uint32_t>(layer.weight.rows()));
    put_u32(out, static_cast<std::uint32_t>(layer.weight.cols()));
  }
  for (const auto& layer : layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) put_f64(out, layer.weight(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) put_f64(out, layer.bias(r));
  }
}

Mlp read_mlp(std::istream& in) {
  const std::uint32_t count = get_u32(in);
  if (count == 0 || count > kMaxLayers) throw std::runtime_error("snapshot: bad layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    if (rows == 0 || cols == 0 || rows > kMaxWidth || cols > kMaxWidth)
      throw std::runtime_error("snapshot: bad layer shape");
    if (i == 0) sizes.push_back(static_cast<int>(cols));
    else if (static_cast<int>(cols) != sizes.back())
      throw std::runtime_error("snapshot: layer shapes do not chain");
    sizes.push_back(static_cast<int>(rows));
  }
  Mlp net(sizes);
  for (auto& layer : net.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = get_f64(in);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = get_f64(in);
  }
  return net;
}

void save_mlp(const std::filesystem::path& path, const Mlp& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_mlp(out, net);
}

Mlp load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_mlp(in);
}

void save_pool(const std::filesystem::path& path, const std::vector<Mlp>& pool) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  put_u32(out, static_cast<std::uint32_t>(pool.size()));
  for (const auto& net : pool) write_mlp(out, net);
}

std::vector<Mlp> load_pool(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::uint32_t count = get_u32(in);
  std::vector<Mlp> pool;
  pool.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) pool.push_back(read_mlp(in));
  return pool;
}

}  // namespace gcrl
