#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gcrl/rng.hpp"

namespace gcrl {

struct StoredTransition {
  std::span<const std::uint8_t> state;
  int action = 0;
  double reward = 0.0;
  std::span<const std::uint8_t> next_state;
  std::span<const std::uint8_t> goal;
  bool done = false;
};

// Fixed-capacity ring of transitions with oldest-first eviction. States and
// goals are stored as compact integer codes of fixed length and encoded into
// network features only when sampled.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t state_code_len, std::size_t goal_code_len);

  void push(std::span<const std::uint8_t> state, int action, double reward,
            std::span<const std::uint8_t> next_state, std::span<const std::uint8_t> goal,
            bool done);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_pushed() const { return pushed_; }
  bool empty() const { return size_ == 0; }

  // i-th oldest stored transition, i in [0, size()).
  StoredTransition at(std::size_t i) const;

  // Uniform with replacement. Throws std::logic_error if fewer than
  // batch_size transitions are stored.
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;

 private:
  std::size_t slot(std::size_t i) const;

  std::size_t capacity_;
  std::size_t state_len_;
  std::size_t goal_len_;
  std::size_t stride_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;  // next slot to write
  std::size_t pushed_ = 0;
  std::vector<std::uint8_t> codes_;
  std::vector<std::int32_t> actions_;
  std::vector<float> rewards_;
  std::vector<std::uint8_t> done_;
};

}  // namespace gcrl
