#pragma once

#include "pgl/nn.hpp"

#include <deque>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <vector>

namespace pgl::runtime {

/// Bounded FIFO of immutable items with uniform sampling (with replacement).
/// Push and sample are mutually exclusive, so one producer and one consumer
/// may share an instance.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  }

  void push(T item) { push(std::make_shared<const T>(std::move(item))); }

  void push(std::shared_ptr<const T> item) {
    std::lock_guard lock(mutex_);
    items_.push_back(std::move(item));
    while (items_.size() > capacity_) items_.pop_front();
    ++total_pushed_;
  }

  std::shared_ptr<const T> sample(Rng& rng) const {
    std::lock_guard lock(mutex_);
    if (items_.empty()) throw std::logic_error("ReplayBuffer: sample from empty buffer");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    return items_[pick(rng)];
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
  }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_pushed() const {
    std::lock_guard lock(mutex_);
    return total_pushed_;
  }

  /// Current contents, oldest first.
  std::vector<std::shared_ptr<const T>> snapshot() const {
    std::lock_guard lock(mutex_);
    return {items_.begin(), items_.end()};
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::deque<std::shared_ptr<const T>> items_;
  std::size_t total_pushed_ = 0;
};

}  // namespace pgl::runtime
