#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ayrl/rng.hpp"

namespace ayrl {

/// One agent-environment interaction.
struct Transition {
  Eigen::VectorXd state;
  int action = 0;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool done = false;
};

/// Fixed-capacity ring with uniform sampling (with replacement).
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity);

  void push(Transition t);
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return slots_[i]; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
  std::vector<Transition> slots_;
};

/// Complete binary tree over power-of-two leaves; every internal node holds
/// the sum of its children, so total mass and proportional lookups are
/// O(log n).
class SumTree {
 public:
  explicit SumTree(std::size_t capacity);

  void update(std::size_t leaf, double value);
  double leaf(std::size_t i) const;
  double total() const { return nodes_[1]; }
  std::size_t leaf_capacity() const { return leaf_capacity_; }

  /// Index of the leaf where the running prefix sum first exceeds `mass`.
  /// Requires 0 <= mass < total().
  std::size_t prefix_find(double mass) const;

 private:
  std::size_t leaf_capacity_;
  std::vector<double> nodes_;  // 1-based heap layout
};

/// Same layout with min instead of sum; unoccupied leaves stay at +inf so the
/// root is the minimum over occupied leaves.
class MinTree {
 public:
  explicit MinTree(std::size_t capacity);

  void update(std::size_t leaf, double value);
  double leaf(std::size_t i) const;
  double min() const { return nodes_[1]; }
  std::size_t leaf_capacity() const { return leaf_capacity_; }

 private:
  std::size_t leaf_capacity_;
  std::vector<double> nodes_;
};

struct PerSample {
  std::vector<const Transition*> items;
  std::vector<std::size_t> leaves;
  Eigen::VectorXd weights;  // importance-sampling weights in (0, 1]
};

/// Proportional prioritized replay: priority |td error| + floor, sampling
/// mass priority^alpha, with importance weights (N P_i)^-beta normalised by
/// the maximum possible weight (from the min tree).
class PrioritizedBuffer {
 public:
  static constexpr double kPriorityFloor = 1e-6;
  static constexpr double kInitialMaxPriority = 1.0;

  PrioritizedBuffer(std::size_t capacity, double alpha, double beta);

  /// New items get the running max priority so everything is replayed at
  /// least plausibly once.
  void push(Transition t);

  /// Stratified proportional sampling over the tree mass.
  PerSample sample(std::size_t batch, Rng& rng) const;

  void update_priorities(const std::vector<std::size_t>& leaves,
                         const Eigen::VectorXd& td_errors);

  void set_beta(double beta);
  double beta() const { return beta_; }
  double alpha() const { return alpha_; }
  double max_priority() const { return max_priority_; }
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  const SumTree& sum_tree() const { return sum_; }
  const MinTree& min_tree() const { return min_; }
  const Transition& at(std::size_t i) const { return slots_[i]; }
  double priority_of(std::size_t i) const { return priorities_[i]; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  std::size_t capacity_;
  double alpha_;
  double beta_;
  double max_priority_ = kInitialMaxPriority;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
  std::vector<Transition> slots_;
  std::vector<double> priorities_;  // raw priorities (pre-alpha)
  SumTree sum_;
  MinTree min_;

  void set_priority(std::size_t index, double priority);
};

/// One on-policy step as recorded at collection time.
struct RolloutStep {
  Eigen::VectorXd state;
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
};

/// Ordered buffer consumed whole by one update, then cleared. The generation
/// counter lets agents assert they never reuse experience across updates.
class RolloutBuffer {
 public:
  RolloutBuffer(std::size_t capacity, double gamma, double lambda);

  void push(RolloutStep step);
  bool full() const { return steps_.size() == capacity_; }
  std::size_t size() const { return steps_.size(); }
  std::size_t capacity() const { return capacity_; }
  void clear();

  const std::vector<RolloutStep>& steps() const { return steps_; }
  double gamma() const { return gamma_; }
  double lambda() const { return lambda_; }
  std::uint64_t generation() const { return generation_; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  std::size_t capacity_;
  double gamma_;
  double lambda_;
  std::uint64_t generation_ = 0;
  std::vector<RolloutStep> steps_;
};

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd lambda_returns;
};

/// Backward recursion A_t = delta_t + gamma lambda A_{t+1}, reset across
/// episode boundaries; bootstrap_value is the critic value of the state after
/// the last step (0 if that step ended the episode).
GaeResult compute_gae(const RolloutBuffer& rollout, double bootstrap_value);

}  // namespace ayrl
