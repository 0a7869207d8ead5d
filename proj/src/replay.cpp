#include "ayrl/replay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ayrl/errors.hpp"
#include "binary_io.hpp"

namespace ayrl {

namespace {
std::size_t round_up_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void put_transition(std::ostream& out, const Transition& t) {
  io::put_vector(out, t.state);
  io::put_pod<std::int32_t>(out, t.action);
  io::put_pod<double>(out, t.reward);
  io::put_vector(out, t.next_state);
  io::put_pod<std::uint8_t>(out, t.done ? 1 : 0);
}

Transition get_transition(std::istream& in) {
  Transition t;
  t.state = io::get_vector(in);
  t.action = io::get_pod<std::int32_t>(in);
  t.reward = io::get_pod<double>(in);
  t.next_state = io::get_vector(in);
  t.done = io::get_pod<std::uint8_t>(in) != 0;
  return t;
}
}  // namespace

RingBuffer::RingBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw UsageError("RingBuffer: capacity must be positive");
  slots_.resize(capacity);
}

void RingBuffer::push(Transition t) {
  slots_[cursor_] = std::move(t);
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

std::vector<const Transition*> RingBuffer::sample(std::size_t batch, Rng& rng) const {
  if (size_ == 0) throw UsageError("RingBuffer: cannot sample from an empty buffer");
  std::vector<const Transition*> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    out.push_back(&slots_[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(size_)))]);
  }
  return out;
}

void RingBuffer::save(std::ostream& out) const {
  io::put_pod<std::uint64_t>(out, capacity_);
  io::put_pod<std::uint64_t>(out, cursor_);
  io::put_pod<std::uint64_t>(out, size_);
  for (std::size_t i = 0; i < size_; ++i) put_transition(out, slots_[i]);
}

void RingBuffer::load(std::istream& in) {
  capacity_ = io::get_pod<std::uint64_t>(in);
  cursor_ = io::get_pod<std::uint64_t>(in);
  size_ = io::get_pod<std::uint64_t>(in);
  slots_.assign(capacity_, {});
  for (std::size_t i = 0; i < size_; ++i) slots_[i] = get_transition(in);
}

SumTree::SumTree(std::size_t capacity) : leaf_capacity_(round_up_pow2(std::max<std::size_t>(capacity, 1))) {
  nodes_.assign(2 * leaf_capacity_, 0.0);
}

void SumTree::update(std::size_t leaf, double value) {
  if (leaf >= leaf_capacity_) throw UsageError("SumTree: leaf index out of range");
  std::size_t node = leaf_capacity_ + leaf;
  nodes_[node] = value;
  for (node >>= 1; node >= 1; node >>= 1) {
    nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
    if (node == 1) break;
  }
}

double SumTree::leaf(std::size_t i) const {
  if (i >= leaf_capacity_) throw UsageError("SumTree: leaf index out of range");
  return nodes_[leaf_capacity_ + i];
}

std::size_t SumTree::prefix_find(double mass) const {
  if (mass < 0.0 || mass >= total()) {
    throw UsageError("SumTree: mass outside [0, total)");
  }
  std::size_t node = 1;
  while (node < leaf_capacity_) {
    const std::size_t left = 2 * node;
    if (mass < nodes_[left]) {
      node = left;
    } else {
      mass -= nodes_[left];
      node = left + 1;
    }
  }
  return node - leaf_capacity_;
}

MinTree::MinTree(std::size_t capacity) : leaf_capacity_(round_up_pow2(std::max<std::size_t>(capacity, 1))) {
  nodes_.assign(2 * leaf_capacity_, std::numeric_limits<double>::infinity());
}

void MinTree::update(std::size_t leaf, double value) {
  if (leaf >= leaf_capacity_) throw UsageError("MinTree: leaf index out of range");
  std::size_t node = leaf_capacity_ + leaf;
  nodes_[node] = value;
  for (node >>= 1; node >= 1; node >>= 1) {
    nodes_[node] = std::min(nodes_[2 * node], nodes_[2 * node + 1]);
    if (node == 1) break;
  }
}

double MinTree::leaf(std::size_t i) const {
  if (i >= leaf_capacity_) throw UsageError("MinTree: leaf index out of range");
  return nodes_[leaf_capacity_ + i];
}

PrioritizedBuffer::PrioritizedBuffer(std::size_t capacity, double alpha, double beta)
    : capacity_(capacity), alpha_(alpha), beta_(beta), sum_(capacity), min_(capacity) {
  if (capacity == 0) throw UsageError("PrioritizedBuffer: capacity must be positive");
  if (alpha < 0.0 || alpha > 1.0) throw UsageError("PrioritizedBuffer: alpha outside [0, 1]");
  if (beta < 0.0 || beta > 1.0) throw UsageError("PrioritizedBuffer: beta outside [0, 1]");
  slots_.resize(capacity);
  priorities_.assign(capacity, 0.0);
}

void PrioritizedBuffer::set_priority(std::size_t index, double priority) {
  priorities_[index] = priority;
  const double mass = std::pow(priority, alpha_);
  sum_.update(index, mass);
  min_.update(index, mass);
}

void PrioritizedBuffer::push(Transition t) {
  slots_[cursor_] = std::move(t);
  set_priority(cursor_, max_priority_);
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

PerSample PrioritizedBuffer::sample(std::size_t batch, Rng& rng) const {
  if (size_ == 0) throw UsageError("PrioritizedBuffer: cannot sample from an empty buffer");
  const double total = sum_.total();
  if (!(total > 0.0)) throw UsageError("PrioritizedBuffer: zero total priority mass");

  PerSample result;
  result.items.reserve(batch);
  result.leaves.reserve(batch);
  result.weights.resize(static_cast<Eigen::Index>(batch));

  const double min_prob = min_.min() / total;
  const double segment = total / static_cast<double>(batch);

  for (std::size_t k = 0; k < batch; ++k) {
    double mass = (static_cast<double>(k) + rng.uniform()) * segment;
    if (mass >= total) mass = std::nextafter(total, 0.0);
    const std::size_t leaf = sum_.prefix_find(mass);
    const double prob = sum_.leaf(leaf) / total;
    // w = (N p)^-beta normalised by the largest possible weight (N p_min)^-beta
    result.weights[static_cast<Eigen::Index>(k)] = std::pow(min_prob / prob, beta_);
    result.leaves.push_back(leaf);
    result.items.push_back(&slots_[leaf]);
  }
  return result;
}

void PrioritizedBuffer::update_priorities(const std::vector<std::size_t>& leaves,
                                          const Eigen::VectorXd& td_errors) {
  if (static_cast<Eigen::Index>(leaves.size()) != td_errors.size()) {
    throw UsageError("update_priorities: index/error length mismatch");
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i] >= size_) throw UsageError("update_priorities: leaf index out of range");
    const double priority = std::abs(td_errors[static_cast<Eigen::Index>(i)]) + kPriorityFloor;
    set_priority(leaves[i], priority);
    max_priority_ = std::max(max_priority_, priority);
  }
}

void PrioritizedBuffer::set_beta(double beta) {
  if (beta < 0.0 || beta > 1.0) throw UsageError("set_beta: beta outside [0, 1]");
  beta_ = beta;
}

void PrioritizedBuffer::save(std::ostream& out) const {
  io::put_pod<std::uint64_t>(out, capacity_);
  io::put_pod<double>(out, alpha_);
  io::put_pod<double>(out, beta_);
  io::put_pod<double>(out, max_priority_);
  io::put_pod<std::uint64_t>(out, cursor_);
  io::put_pod<std::uint64_t>(out, size_);
  for (std::size_t i = 0; i < size_; ++i) {
    put_transition(out, slots_[i]);
    io::put_pod<double>(out, priorities_[i]);
  }
}

void PrioritizedBuffer::load(std::istream& in) {
  capacity_ = io::get_pod<std::uint64_t>(in);
  alpha_ = io::get_pod<double>(in);
  beta_ = io::get_pod<double>(in);
  max_priority_ = io::get_pod<double>(in);
  cursor_ = io::get_pod<std::uint64_t>(in);
  size_ = io::get_pod<std::uint64_t>(in);
  slots_.assign(capacity_, {});
  priorities_.assign(capacity_, 0.0);
  sum_ = SumTree(capacity_);
  min_ = MinTree(capacity_);
  for (std::size_t i = 0; i < size_; ++i) {
    slots_[i] = get_transition(in);
    set_priority(i, io::get_pod<double>(in));
  }
}

RolloutBuffer::RolloutBuffer(std::size_t capacity, double gamma, double lambda)
    : capacity_(capacity), gamma_(gamma), lambda_(lambda) {
  if (capacity == 0) throw UsageError("RolloutBuffer: capacity must be positive");
  steps_.reserve(capacity);
}

void RolloutBuffer::push(RolloutStep step) {
  if (full()) throw UsageError("RolloutBuffer: push into a full buffer");
  steps_.push_back(std::move(step));
}

void RolloutBuffer::clear() {
  steps_.clear();
  ++generation_;
}

void RolloutBuffer::save(std::ostream& out) const {
  io::put_pod<std::uint64_t>(out, capacity_);
  io::put_pod<double>(out, gamma_);
  io::put_pod<double>(out, lambda_);
  io::put_pod<std::uint64_t>(out, generation_);
  io::put_pod<std::uint64_t>(out, steps_.size());
  for (const auto& s : steps_) {
    io::put_vector(out, s.state);
    io::put_pod<std::int32_t>(out, s.action);
    io::put_pod<double>(out, s.log_prob);
    io::put_pod<double>(out, s.value);
    io::put_pod<double>(out, s.reward);
    io::put_pod<std::uint8_t>(out, s.done ? 1 : 0);
  }
}

void RolloutBuffer::load(std::istream& in) {
  capacity_ = io::get_pod<std::uint64_t>(in);
  gamma_ = io::get_pod<double>(in);
  lambda_ = io::get_pod<double>(in);
  generation_ = io::get_pod<std::uint64_t>(in);
  const auto n = io::get_pod<std::uint64_t>(in);
  steps_.clear();
  steps_.reserve(capacity_);
  for (std::uint64_t i = 0; i < n; ++i) {
    RolloutStep s;
    s.state = io::get_vector(in);
    s.action = io::get_pod<std::int32_t>(in);
    s.log_prob = io::get_pod<double>(in);
    s.value = io::get_pod<double>(in);
    s.reward = io::get_pod<double>(in);
    s.done = io::get_pod<std::uint8_t>(in) != 0;
    steps_.push_back(std::move(s));
  }
}

GaeResult compute_gae(const RolloutBuffer& rollout, double bootstrap_value) {
  const auto& steps = rollout.steps();
  if (steps.empty()) throw UsageError("compute_gae: empty rollout");
  const auto n = static_cast<Eigen::Index>(steps.size());
  const double gamma = rollout.gamma();
  const double lambda = rollout.lambda();

  GaeResult result;
  result.advantages.resize(n);
  result.lambda_returns.resize(n);

  double next_advantage = 0.0;
  double next_value = bootstrap_value;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const auto& s = steps[static_cast<std::size_t>(t)];
    const double not_done = s.done ? 0.0 : 1.0;
    const double delta = s.reward + not_done * gamma * next_value - s.value;
    const double advantage = delta + not_done * gamma * lambda * next_advantage;
    result.advantages[t] = advantage;
    result.lambda_returns[t] = advantage + s.value;
    next_advantage = advantage;
    next_value = s.value;
  }
  return result;
}

}  // namespace ayrl
