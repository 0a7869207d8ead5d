#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ayrl/nn.hpp"
#include "ayrl/replay.hpp"
#include "ayrl/rng.hpp"

namespace ayrl {

/// epsilon(t) = min(1, epsilon0 * t^-rho + floor); t counts actions taken.
struct EpsilonSchedule {
  double epsilon0 = 1.0;
  double decay_exponent = 0.5;  // rho
  double floor = 0.01;
};

double epsilon_value(const EpsilonSchedule& schedule, long t);

/// Everything an agent needs to be built. The factory fills per-kind defaults
/// (the tuned hyperparameter tables) and then applies overrides.
struct AgentConfig {
  std::string kind = "dqn";
  int observation_width = 3;
  int num_actions = 4;
  std::vector<int> hidden_widths = {256, 256, 256};
  double gamma = 0.99;
  long total_frames = 500000;
  std::uint64_t init_seed = 0;

  // Q-learning family
  double learning_rate = 0.0;
  double exploration_decay = 0.0;  // rho of the epsilon schedule
  std::size_t batch_size = 0;
  std::size_t buffer_size = 0;
  long target_update_every = 0;  // updates between target copies
  long decay_number = 0;
  double per_alpha = 0.0;
  double per_beta = 0.0;
  bool double_q_standard_convention = false;

  // actor-critic family
  double actor_learning_rate = 0.0;
  double critic_learning_rate = 0.0;
  double entropy_coeff = 0.0;
  std::size_t rollout_length = 0;
  double gae_lambda = 0.0;
  double ppo_clip = 0.0;
  long ppo_epochs = 50;
  std::size_t ppo_batch_size = 0;
  double grad_clip_norm = 1.0;
};

struct UpdateResult {
  bool updated = false;
  double loss = 0.0;        // Q-learning family
  double actor_loss = 0.0;  // actor-critic family
  double critic_loss = 0.0;
};

/// Experience-buffer counters surfaced in the harness metrics log; fields
/// that do not apply to a buffer kind stay negative.
struct BufferStats {
  long size = 0;
  double max_priority = -1.0;
  double beta = -1.0;
};

/// Uniform interface over the four learners (and the uniform-random
/// baseline): act, observe, maybe_update.
class Agent {
 public:
  virtual ~Agent() = default;

  /// Training policy; advances exploration/frame counters.
  virtual int act(const Eigen::VectorXd& observation, Rng& rng) = 0;

  /// Deterministic policy (argmax); mutates nothing.
  virtual int greedy_act(const Eigen::VectorXd& observation) const = 0;

  /// Evaluation policy: greedy flag applies to the Q-learning agents;
  /// actor-critics always sample their policy. Mutates no counters.
  virtual int eval_act(const Eigen::VectorXd& observation, Rng& rng, bool greedy) const {
    (void)rng;
    (void)greedy;
    return greedy_act(observation);
  }

  virtual void observe(const Transition& transition) = 0;
  virtual UpdateResult maybe_update(Rng& rng) = 0;

  /// max_a Q(s, a) for Q-heads, v(s) for critics (grid sweeps).
  virtual double value_estimate(const Eigen::VectorXd& observation) const = 0;

  virtual std::optional<BufferStats> buffer_stats() const { return std::nullopt; }

  virtual const std::string& kind() const = 0;
  virtual int observation_width() const = 0;
  virtual long frames() const = 0;

  virtual void save(std::ostream& out) const = 0;
  virtual void load(std::istream& in) = 0;
};

/// Shifts to mean zero and scales to unit standard deviation (population,
/// floored at 1e-8).
Eigen::VectorXd normalize_advantages(const Eigen::VectorXd& advantages);

/// r + gamma * Q_eval(s', argmax_a Q_select(s', a)). Default role assignment:
/// the target network selects and the policy network evaluates;
/// standard_convention swaps the roles.
double double_q_target(const MlpNetwork& policy_net, const MlpNetwork& target_net, double reward,
                       const Eigen::VectorXd& next_state, bool done, double gamma,
                       bool standard_convention = false);

class DqnAgent : public Agent {
 public:
  explicit DqnAgent(const AgentConfig& config);

  int act(const Eigen::VectorXd& observation, Rng& rng) override;
  int greedy_act(const Eigen::VectorXd& observation) const override;
  int eval_act(const Eigen::VectorXd& observation, Rng& rng, bool greedy) const override;
  void observe(const Transition& transition) override;
  UpdateResult maybe_update(Rng& rng) override;
  double value_estimate(const Eigen::VectorXd& observation) const override;
  const std::string& kind() const override { return kind_; }
  int observation_width() const override { return policy_net_.input_width(); }
  long frames() const override { return action_count_; }
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  double current_epsilon() const { return epsilon_value(epsilon_, action_count_); }
  const MlpNetwork& policy_net() const { return policy_net_; }
  const MlpNetwork& target_net() const { return target_net_; }
  MlpNetwork& mutable_policy_net() { return policy_net_; }
  const RingBuffer& buffer() const { return buffer_; }
  long update_count() const { return update_count_; }
  std::optional<BufferStats> buffer_stats() const override {
    return BufferStats{static_cast<long>(buffer_.size()), -1.0, -1.0};
  }

  /// Loss and per-parameter gradients of the DQN regression on an explicit
  /// batch with frozen targets (exposed so tests can check the analytic
  /// gradient against finite differences).
  std::pair<double, GradientBundle> loss_and_gradients(
      const std::vector<const Transition*>& batch, const Eigen::VectorXd& targets) const;
  Eigen::VectorXd batch_targets(const std::vector<const Transition*>& batch) const;

 protected:
  std::string kind_ = "dqn";
  AgentConfig config_;
  MlpNetwork policy_net_;
  MlpNetwork target_net_;
  AdamOptimizer adam_;
  LrSchedule lr_schedule_;
  RingBuffer buffer_;
  EpsilonSchedule epsilon_;
  long action_count_ = 0;
  long update_count_ = 0;

  int argmax_action(const MlpNetwork& net, const Eigen::VectorXd& observation) const;
  Eigen::MatrixXd stack_states(const std::vector<const Transition*>& batch, bool next) const;
};

class DuelDdqnAgent : public Agent {
 public:
  explicit DuelDdqnAgent(const AgentConfig& config);

  int act(const Eigen::VectorXd& observation, Rng& rng) override;
  int greedy_act(const Eigen::VectorXd& observation) const override;
  int eval_act(const Eigen::VectorXd& observation, Rng& rng, bool greedy) const override;
  void observe(const Transition& transition) override;
  UpdateResult maybe_update(Rng& rng) override;
  double value_estimate(const Eigen::VectorXd& observation) const override;
  const std::string& kind() const override { return kind_; }
  int observation_width() const override { return policy_net_.input_width(); }
  long frames() const override { return action_count_; }
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  double current_epsilon() const { return epsilon_value(epsilon_, action_count_); }
  const MlpNetwork& policy_net() const { return policy_net_; }
  MlpNetwork& mutable_policy_net() { return policy_net_; }
  const PrioritizedBuffer& buffer() const { return buffer_; }
  long update_count() const { return update_count_; }
  std::optional<BufferStats> buffer_stats() const override {
    return BufferStats{static_cast<long>(buffer_.size()), buffer_.max_priority(),
                       buffer_.beta()};
  }

  /// Importance-weighted regression against frozen double-Q targets; also
  /// returns the per-item TD errors that become the new priorities.
  std::tuple<double, GradientBundle, Eigen::VectorXd> loss_and_gradients(
      const std::vector<const Transition*>& batch, const Eigen::VectorXd& targets,
      const Eigen::VectorXd& weights) const;
  Eigen::VectorXd batch_targets(const std::vector<const Transition*>& batch) const;

 private:
  std::string kind_ = "duelddqn";
  AgentConfig config_;
  MlpNetwork policy_net_;
  MlpNetwork target_net_;
  AdamOptimizer adam_;
  LrSchedule lr_schedule_;
  PrioritizedBuffer buffer_;
  EpsilonSchedule epsilon_;
  long action_count_ = 0;
  long update_count_ = 0;

  double annealed_beta() const;
};

/// Losses for one actor-critic update, plus the gradients that produced them.
struct ActorCriticLosses {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  GradientBundle actor_grads;
  GradientBundle critic_grads;
};

class A2cAgent : public Agent {
 public:
  explicit A2cAgent(const AgentConfig& config);

  int act(const Eigen::VectorXd& observation, Rng& rng) override;
  int greedy_act(const Eigen::VectorXd& observation) const override;
  int eval_act(const Eigen::VectorXd& observation, Rng& rng, bool greedy) const override;
  void observe(const Transition& transition) override;
  UpdateResult maybe_update(Rng& rng) override;
  double value_estimate(const Eigen::VectorXd& observation) const override;
  const std::string& kind() const override { return kind_; }
  int observation_width() const override { return actor_net_.input_width(); }
  long frames() const override { return action_count_; }
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  const MlpNetwork& actor_net() const { return actor_net_; }
  const MlpNetwork& critic_net() const { return critic_net_; }
  MlpNetwork& mutable_actor_net() { return actor_net_; }
  MlpNetwork& mutable_critic_net() { return critic_net_; }
  const RolloutBuffer& rollout() const { return rollout_; }
  std::optional<BufferStats> buffer_stats() const override {
    return BufferStats{static_cast<long>(rollout_.size()), -1.0, -1.0};
  }

  /// r_t + gamma * v(s_{t+1}) with the next value taken from the following
  /// rollout row (bootstrap after the last step); gradients never flow
  /// through these.
  Eigen::VectorXd one_step_targets(const std::vector<RolloutStep>& steps,
                                   double bootstrap_value) const;

  /// Actor/critic losses against frozen one-step targets; the advantage
  /// (target - v) is a constant in the actor term.
  ActorCriticLosses compute_losses(const std::vector<RolloutStep>& steps,
                                   const Eigen::VectorXd& td_targets) const;

 private:
  std::string kind_ = "a2c";
  AgentConfig config_;
  MlpNetwork actor_net_;
  MlpNetwork critic_net_;
  AdamOptimizer adam_actor_;
  AdamOptimizer adam_critic_;
  LrSchedule actor_schedule_;
  LrSchedule critic_schedule_;
  RolloutBuffer rollout_;
  long action_count_ = 0;
  double last_log_prob_ = 0.0;
  double last_value_ = 0.0;
  Eigen::VectorXd last_next_state_;
  bool last_done_ = false;
  std::uint64_t rollout_actor_version_ = 0;
};

class PpoAgent : public Agent {
 public:
  explicit PpoAgent(const AgentConfig& config);

  int act(const Eigen::VectorXd& observation, Rng& rng) override;
  int greedy_act(const Eigen::VectorXd& observation) const override;
  int eval_act(const Eigen::VectorXd& observation, Rng& rng, bool greedy) const override;
  void observe(const Transition& transition) override;
  UpdateResult maybe_update(Rng& rng) override;
  double value_estimate(const Eigen::VectorXd& observation) const override;
  const std::string& kind() const override { return kind_; }
  int observation_width() const override { return actor_net_.input_width(); }
  long frames() const override { return action_count_; }
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  const MlpNetwork& actor_net() const { return actor_net_; }
  const MlpNetwork& critic_net() const { return critic_net_; }
  MlpNetwork& mutable_actor_net() { return actor_net_; }
  MlpNetwork& mutable_critic_net() { return critic_net_; }
  const RolloutBuffer& rollout() const { return rollout_; }
  std::optional<BufferStats> buffer_stats() const override {
    return BufferStats{static_cast<long>(rollout_.size()), -1.0, -1.0};
  }

  /// Clipped-surrogate actor loss and squared-error critic loss on one
  /// minibatch with fixed (already normalised) advantages, old log-probs and
  /// lambda-returns.
  ActorCriticLosses compute_losses(const std::vector<const RolloutStep*>& batch,
                                   const Eigen::VectorXd& advantages,
                                   const Eigen::VectorXd& lambda_returns) const;

 private:
  std::string kind_ = "ppo";
  AgentConfig config_;
  MlpNetwork actor_net_;
  MlpNetwork critic_net_;
  AdamOptimizer adam_actor_;
  AdamOptimizer adam_critic_;
  LrSchedule actor_schedule_;
  LrSchedule critic_schedule_;
  RolloutBuffer rollout_;
  long action_count_ = 0;
  double last_log_prob_ = 0.0;
  double last_value_ = 0.0;
  Eigen::VectorXd last_next_state_;
  bool last_done_ = false;
  std::uint64_t rollout_actor_version_ = 0;
};

/// Uniform-random baseline.
class RandomAgent : public Agent {
 public:
  explicit RandomAgent(int observation_width, int num_actions = 4);

  int act(const Eigen::VectorXd& observation, Rng& rng) override;
  int greedy_act(const Eigen::VectorXd& observation) const override;
  int eval_act(const Eigen::VectorXd& observation, Rng& rng, bool greedy) const override;
  void observe(const Transition& transition) override;
  UpdateResult maybe_update(Rng& rng) override;
  double value_estimate(const Eigen::VectorXd& observation) const override;
  const std::string& kind() const override { return kind_; }
  int observation_width() const override { return observation_width_; }
  long frames() const override { return action_count_; }
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

 private:
  std::string kind_ = "random";
  int observation_width_;
  int num_actions_;
  long action_count_ = 0;
};

/// Defaults from the tuned hyperparameter tables, by agent kind.
AgentConfig default_agent_config(const std::string& kind, int observation_width,
                                 long total_frames, std::uint64_t init_seed, double gamma = 0.99);

/// Applies named overrides; unknown or inapplicable keys raise ConfigError.
void apply_override(AgentConfig& config, const std::string& key, double value);

std::unique_ptr<Agent> make_agent(const AgentConfig& config);
std::unique_ptr<Agent> make_agent(const std::string& kind, int observation_width,
                                  long total_frames, std::uint64_t init_seed,
                                  const std::map<std::string, double>& overrides = {},
                                  double gamma = 0.99);

/// Reads back any agent checkpoint written by Agent::save.
std::unique_ptr<Agent> load_agent(std::istream& in);
std::unique_ptr<Agent> load_agent_file(const std::string& path);
void save_agent_file(const Agent& agent, const std::string& path);

}  // namespace ayrl
