#pragma once

// Bounded FIFO transition store with seeded uniform sampling (with
// replacement). Single writer, single reader per experiment instance.

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "riskgate/rng.hpp"
#include "riskgate/transition.hpp"

namespace riskgate {

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed)
      : capacity_(capacity), rng_(Rng::derive(seed, 777)) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    storage_.reserve(capacity);
  }

  void push(Transition t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::vector<Transition> sample(std::size_t k) {
    if (storage_.empty()) throw std::invalid_argument("ReplayBuffer: sample from empty buffer");
    std::vector<Transition> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
      out.push_back(storage_[static_cast<std::size_t>(rng_.uniform_int(static_cast<int>(storage_.size())))]);
    return out;
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return storage_.at(i); }

  // One transition per row; vector-valued fields are expanded with indexed
  // column names.
  void dump_csv(std::ostream& os) const {
    if (storage_.empty()) return;
    const std::size_t fd = storage_.front().proxy_features.size();
    const std::size_t na = storage_.front().next_risk_vector.size();
    os << "action,shaped_reward,raw_reward,cost,violation,predicted_risk,terminal";
    for (std::size_t i = 0; i < fd; ++i) os << ",f" << i;
    for (std::size_t i = 0; i < fd; ++i) os << ",nf" << i;
    for (std::size_t i = 0; i < na; ++i) os << ",nrisk" << i;
    os << "\n";
    for (const auto& t : storage_) {
      os << t.action << ',' << t.shaped_reward << ',' << t.raw_reward << ',' << t.cost << ','
         << (t.violation ? 1 : 0) << ',' << t.predicted_risk_at_selection << ',' << (t.terminal ? 1 : 0);
      for (double v : t.proxy_features) os << ',' << v;
      for (double v : t.next_proxy_features) os << ',' << v;
      for (double v : t.next_risk_vector.values) os << ',' << v;
      os << "\n";
    }
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next eviction slot once full
  std::vector<Transition> storage_;
  Rng rng_;
};

}  // namespace riskgate
