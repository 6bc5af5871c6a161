#include "gcrl/replay.hpp"

#include <algorithm>
#include <stdexcept>

namespace gcrl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t state_code_len,
                           std::size_t goal_code_len)
    : capacity_(capacity),
      state_len_(state_code_len),
      goal_len_(goal_code_len),
      stride_(2 * state_code_len + goal_code_len) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(std::span<const std::uint8_t> state, int action, double reward,
                        std::span<const std::uint8_t> next_state,
                        std::span<const std::uint8_t> goal, bool done) {
  if (state.size() != state_len_ || next_state.size() != state_len_ || goal.size() != goal_len_)
    throw std::invalid_argument("ReplayBuffer::push: code length mismatch");
  // Storage grows on demand up to capacity, then slots are overwritten.
  if (size_ < capacity_) {
    codes_.resize(codes_.size() + stride_);
    actions_.push_back(0);
    rewards_.push_back(0.0f);
    done_.push_back(0);
    ++size_;
  }
  std::uint8_t* dst = codes_.data() + head_ * stride_;
  std::copy(state.begin(), state.end(), dst);
  std::copy(next_state.begin(), next_state.end(), dst + state_len_);
  std::copy(goal.begin(), goal.end(), dst + 2 * state_len_);
  actions_[head_] = action;
  rewards_[head_] = static_cast<float>(reward);
  done_[head_] = done ? 1 : 0;
  head_ = (head_ + 1) % capacity_;
  ++pushed_;
}

std::size_t ReplayBuffer::slot(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("ReplayBuffer::at");
  return size_ < capacity_ ? i : (head_ + i) % capacity_;
}

StoredTransition ReplayBuffer::at(std::size_t i) const {
  const std::size_t s = slot(i);
  const std::uint8_t* base = codes_.data() + s * stride_;
  StoredTransition t;
  t.state = {base, state_len_};
  t.next_state = {base + state_len_, state_len_};
  t.goal = {base + 2 * state_len_, goal_len_};
  t.action = actions_[s];
  t.reward = rewards_[s];
  t.done = done_[s] != 0;
  return t;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
  if (size_ < batch_size || batch_size == 0)
    throw std::logic_error("ReplayBuffer: " + std::to_string(size_) +
                           " stored transitions, batch of " + std::to_string(batch_size) +
                           " requested");
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = rng.index(size_);
  return idx;
}

}  // namespace gcrl
