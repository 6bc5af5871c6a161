#include "gcrl/gmdp.hpp"

#include <cmath>

namespace gcrl {

namespace {

void require_same_shape(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("distance metric undefined for shapes " +
                                std::to_string(a.size()) + " and " + std::to_string(b.size()));
}

}  // namespace

double manhattan_distance(std::span<const double> a, std::span<const double> b) {
  require_same_shape(a, b);
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  require_same_shape(a, b);
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(d);
}

double distance_reward(const Experience<std::vector<double>>& exp, std::span<const double> goal,
                       CreditMode mode, const CreditMap& f, const DistanceMetric& d) {
  if (!f || !d) throw std::invalid_argument("distance_reward: f and d are required");
  const double after = d(exp.next_state, goal);
  if (mode == CreditMode::absolute) return f(-after);
  const double before = d(exp.state, goal);
  return f(before - after);
}

}  // namespace gcrl
