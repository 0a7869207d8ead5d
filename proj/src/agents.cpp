#include "ayrl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ayrl/errors.hpp"
#include "binary_io.hpp"

namespace ayrl {

namespace {
constexpr char kAgentMagic[] = "AYRLAGT1";

int argmax_row(const Eigen::VectorXd& values) {
  int best = 0;
  for (int i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;  // ties keep the lowest index
  }
  return best;
}

void save_agent_config(std::ostream& out, const AgentConfig& c) {
  io::put_string(out, c.kind);
  io::put_pod<std::int32_t>(out, c.observation_width);
  io::put_pod<std::int32_t>(out, c.num_actions);
  io::put_pod<std::uint64_t>(out, c.hidden_widths.size());
  for (int w : c.hidden_widths) io::put_pod<std::int32_t>(out, w);
  io::put_pod<double>(out, c.gamma);
  io::put_pod<std::int64_t>(out, c.total_frames);
  io::put_pod<std::uint64_t>(out, c.init_seed);
  io::put_pod<double>(out, c.learning_rate);
  io::put_pod<double>(out, c.exploration_decay);
  io::put_pod<std::uint64_t>(out, c.batch_size);
  io::put_pod<std::uint64_t>(out, c.buffer_size);
  io::put_pod<std::int64_t>(out, c.target_update_every);
  io::put_pod<std::int64_t>(out, c.decay_number);
  io::put_pod<double>(out, c.per_alpha);
  io::put_pod<double>(out, c.per_beta);
  io::put_pod<std::uint8_t>(out, c.double_q_standard_convention ? 1 : 0);
  io::put_pod<double>(out, c.actor_learning_rate);
  io::put_pod<double>(out, c.critic_learning_rate);
  io::put_pod<double>(out, c.entropy_coeff);
  io::put_pod<std::uint64_t>(out, c.rollout_length);
  io::put_pod<double>(out, c.gae_lambda);
  io::put_pod<double>(out, c.ppo_clip);
  io::put_pod<std::int64_t>(out, c.ppo_epochs);
  io::put_pod<std::uint64_t>(out, c.ppo_batch_size);
  io::put_pod<double>(out, c.grad_clip_norm);
}

AgentConfig load_agent_config(std::istream& in) {
  AgentConfig c;
  c.kind = io::get_string(in);
  c.observation_width = io::get_pod<std::int32_t>(in);
  c.num_actions = io::get_pod<std::int32_t>(in);
  const auto n = io::get_pod<std::uint64_t>(in);
  c.hidden_widths.clear();
  for (std::uint64_t i = 0; i < n; ++i) c.hidden_widths.push_back(io::get_pod<std::int32_t>(in));
  c.gamma = io::get_pod<double>(in);
  c.total_frames = io::get_pod<std::int64_t>(in);
  c.init_seed = io::get_pod<std::uint64_t>(in);
  c.learning_rate = io::get_pod<double>(in);
  c.exploration_decay = io::get_pod<double>(in);
  c.batch_size = io::get_pod<std::uint64_t>(in);
  c.buffer_size = io::get_pod<std::uint64_t>(in);
  c.target_update_every = io::get_pod<std::int64_t>(in);
  c.decay_number = io::get_pod<std::int64_t>(in);
  c.per_alpha = io::get_pod<double>(in);
  c.per_beta = io::get_pod<double>(in);
  c.double_q_standard_convention = io::get_pod<std::uint8_t>(in) != 0;
  c.actor_learning_rate = io::get_pod<double>(in);
  c.critic_learning_rate = io::get_pod<double>(in);
  c.entropy_coeff = io::get_pod<double>(in);
  c.rollout_length = io::get_pod<std::uint64_t>(in);
  c.gae_lambda = io::get_pod<double>(in);
  c.ppo_clip = io::get_pod<double>(in);
  c.ppo_epochs = io::get_pod<std::int64_t>(in);
  c.ppo_batch_size = io::get_pod<std::uint64_t>(in);
  c.grad_clip_norm = io::get_pod<double>(in);
  return c;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
  }
  return idx;
}
}  // namespace

double epsilon_value(const EpsilonSchedule& schedule, long t) {
  if (t <= 0) return 1.0;
  const double raw =
      schedule.epsilon0 * std::pow(static_cast<double>(t), -schedule.decay_exponent) +
      schedule.floor;
  return std::min(1.0, raw);
}

Eigen::VectorXd normalize_advantages(const Eigen::VectorXd& advantages) {
  if (advantages.size() == 0) throw UsageError("normalize_advantages: empty input");
  const double mean = advantages.mean();
  const double stddev = std::sqrt((advantages.array() - mean).square().sum() /
                                  static_cast<double>(advantages.size()));
  return (advantages.array() - mean) / std::max(stddev, 1e-8);
}

double double_q_target(const MlpNetwork& policy_net, const MlpNetwork& target_net, double reward,
                       const Eigen::VectorXd& next_state, bool done, double gamma,
                       bool standard_convention) {
  if (done) return reward;
  const MlpNetwork& select = standard_convention ? policy_net : target_net;
  const MlpNetwork& evaluate = standard_convention ? target_net : policy_net;
  const int chosen = argmax_row(select.forward_vec(next_state));
  return reward + gamma * evaluate.forward_vec(next_state)[chosen];
}

// ---------------------------------------------------------------------------
// DQN

DqnAgent::DqnAgent(const AgentConfig& config)
    : config_(config),
      policy_net_(config.observation_width, config.hidden_widths, HeadKind::kActionValues,
                  config.num_actions),
      adam_(config.learning_rate),
      lr_schedule_{config.learning_rate, 0.5, config.decay_number, config.total_frames},
      buffer_(config.buffer_size),
      epsilon_{1.0, config.exploration_decay, 0.01} {
  Rng init_rng(config.init_seed);
  policy_net_.init_params(init_rng);
  target_net_ = policy_net_;
  adam_.attach(policy_net_.blocks());
}

int DqnAgent::argmax_action(const MlpNetwork& net, const Eigen::VectorXd& observation) const {
  return argmax_row(net.forward_vec(observation));
}

int DqnAgent::act(const Eigen::VectorXd& observation, Rng& rng) {
  ++action_count_;
  const double eps = epsilon_value(epsilon_, action_count_);
  if (rng.uniform() < eps) return rng.uniform_int(config_.num_actions);
  return argmax_action(policy_net_, observation);
}

int DqnAgent::greedy_act(const Eigen::VectorXd& observation) const {
  return argmax_action(policy_net_, observation);
}

int DqnAgent::eval_act(const Eigen::VectorXd& observation, Rng& rng, bool greedy) const {
  if (!greedy && rng.uniform() < current_epsilon()) return rng.uniform_int(config_.num_actions);
  return greedy_act(observation);
}

void DqnAgent::observe(const Transition& transition) { buffer_.push(transition); }

Eigen::MatrixXd DqnAgent::stack_states(const std::vector<const Transition*>& batch,
                                       bool next) const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(batch.size()), policy_net_.input_width());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    X.row(static_cast<Eigen::Index>(j)) =
        (next ? batch[j]->next_state : batch[j]->state).transpose();
  }
  return X;
}

Eigen::VectorXd DqnAgent::batch_targets(const std::vector<const Transition*>& batch) const {
  const Eigen::MatrixXd next_q = target_net_.forward(stack_states(batch, true));
  Eigen::VectorXd targets(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    targets[jj] = batch[j]->reward;
    if (!batch[j]->done) targets[jj] += config_.gamma * next_q.row(jj).maxCoeff();
  }
  return targets;
}

std::pair<double, GradientBundle> DqnAgent::loss_and_gradients(
    const std::vector<const Transition*>& batch, const Eigen::VectorXd& targets) const {
  const auto n = static_cast<Eigen::Index>(batch.size());
  ForwardCache cache;
  const Eigen::MatrixXd q = policy_net_.forward(stack_states(batch, false), &cache);

  double loss = 0.0;
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(n, q.cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    const int a = batch[static_cast<std::size_t>(j)]->action;
    const double err = q(j, a) - targets[j];
    loss += err * err;
    dq(j, a) = 2.0 * err / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  return {loss, policy_net_.backward(cache, dq)};
}

UpdateResult DqnAgent::maybe_update(Rng& rng) {
  if (buffer_.size() < config_.batch_size) return {};
  const auto batch = buffer_.sample(config_.batch_size, rng);
  const Eigen::VectorXd targets = batch_targets(batch);
  auto [loss, grads] = loss_and_gradients(batch, targets);

  adam_.set_learning_rate(scheduled_rate(lr_schedule_, action_count_));
  adam_.step(policy_net_, grads);
  ++update_count_;
  if (config_.target_update_every > 0 && update_count_ % config_.target_update_every == 0) {
    target_net_ = policy_net_;
  }
  UpdateResult result;
  result.updated = true;
  result.loss = loss;
  return result;
}

double DqnAgent::value_estimate(const Eigen::VectorXd& observation) const {
  return policy_net_.forward_vec(observation).maxCoeff();
}

void DqnAgent::save(std::ostream& out) const {
  io::put_magic(out, kAgentMagic);
  save_agent_config(out, config_);
  io::put_pod<std::int64_t>(out, action_count_);
  io::put_pod<std::int64_t>(out, update_count_);
  policy_net_.save(out);
  target_net_.save(out);
  adam_.save(out);
  buffer_.save(out);
}

void DqnAgent::load(std::istream& in) {
  action_count_ = io::get_pod<std::int64_t>(in);
  update_count_ = io::get_pod<std::int64_t>(in);
  policy_net_ = MlpNetwork::load(in);
  target_net_ = MlpNetwork::load(in);
  adam_.load(in);
  buffer_.load(in);
}

// ---------------------------------------------------------------------------
// DuelDDQN with prioritized replay

DuelDdqnAgent::DuelDdqnAgent(const AgentConfig& config)
    : config_(config),
      policy_net_(config.observation_width, config.hidden_widths, HeadKind::kDueling,
                  config.num_actions),
      adam_(config.learning_rate),
      lr_schedule_{config.learning_rate, 0.5, config.decay_number, config.total_frames},
      buffer_(config.buffer_size, config.per_alpha, config.per_beta),
      epsilon_{1.0, config.exploration_decay, 0.01} {
  Rng init_rng(config.init_seed);
  policy_net_.init_params(init_rng);
  target_net_ = policy_net_;
  adam_.attach(policy_net_.blocks());
}

int DuelDdqnAgent::act(const Eigen::VectorXd& observation, Rng& rng) {
  ++action_count_;
  const double eps = epsilon_value(epsilon_, action_count_);
  if (rng.uniform() < eps) return rng.uniform_int(config_.num_actions);
  return argmax_row(policy_net_.forward_vec(observation));
}

int DuelDdqnAgent::greedy_act(const Eigen::VectorXd& observation) const {
  return argmax_row(policy_net_.forward_vec(observation));
}

int DuelDdqnAgent::eval_act(const Eigen::VectorXd& observation, Rng& rng, bool greedy) const {
  if (!greedy && rng.uniform() < current_epsilon()) return rng.uniform_int(config_.num_actions);
  return greedy_act(observation);
}

void DuelDdqnAgent::observe(const Transition& transition) { buffer_.push(transition); }

double DuelDdqnAgent::annealed_beta() const {
  const double progress = std::min(
      1.0, static_cast<double>(action_count_) / static_cast<double>(config_.total_frames));
  return config_.per_beta + (1.0 - config_.per_beta) * progress;
}

Eigen::VectorXd DuelDdqnAgent::batch_targets(const std::vector<const Transition*>& batch) const {
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd next_states(n, policy_net_.input_width());
  for (Eigen::Index j = 0; j < n; ++j) {
    next_states.row(j) = batch[static_cast<std::size_t>(j)]->next_state.transpose();
  }
  const bool std_conv = config_.double_q_standard_convention;
  const Eigen::MatrixXd select_q =
      (std_conv ? policy_net_ : target_net_).forward(next_states);
  const Eigen::MatrixXd eval_q = (std_conv ? target_net_ : policy_net_).forward(next_states);

  Eigen::VectorXd targets(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto* t = batch[static_cast<std::size_t>(j)];
    targets[j] = t->reward;
    if (!t->done) {
      Eigen::VectorXd row = select_q.row(j).transpose();
      targets[j] += config_.gamma * eval_q(j, argmax_row(row));
    }
  }
  return targets;
}

std::tuple<double, GradientBundle, Eigen::VectorXd> DuelDdqnAgent::loss_and_gradients(
    const std::vector<const Transition*>& batch, const Eigen::VectorXd& targets,
    const Eigen::VectorXd& weights) const {
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd states(n, policy_net_.input_width());
  for (Eigen::Index j = 0; j < n; ++j) {
    states.row(j) = batch[static_cast<std::size_t>(j)]->state.transpose();
  }
  ForwardCache cache;
  const Eigen::MatrixXd q = policy_net_.forward(states, &cache);

  double loss = 0.0;
  Eigen::VectorXd td_errors(n);
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(n, q.cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    const int a = batch[static_cast<std::size_t>(j)]->action;
    const double err = q(j, a) - targets[j];
    td_errors[j] = targets[j] - q(j, a);
    loss += weights[j] * err * err;
    dq(j, a) = 2.0 * weights[j] * err / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  return {loss, policy_net_.backward(cache, dq), td_errors};
}

UpdateResult DuelDdqnAgent::maybe_update(Rng& rng) {
  if (buffer_.size() < config_.batch_size) return {};
  buffer_.set_beta(annealed_beta());
  const PerSample sample = buffer_.sample(config_.batch_size, rng);
  const Eigen::VectorXd targets = batch_targets(sample.items);
  auto [loss, grads, td_errors] = loss_and_gradients(sample.items, targets, sample.weights);

  adam_.set_learning_rate(scheduled_rate(lr_schedule_, action_count_));
  adam_.step(policy_net_, grads);
  buffer_.update_priorities(sample.leaves, td_errors);
  ++update_count_;
  if (config_.target_update_every > 0 && update_count_ % config_.target_update_every == 0) {
    target_net_ = policy_net_;
  }
  UpdateResult result;
  result.updated = true;
  result.loss = loss;
  return result;
}

double DuelDdqnAgent::value_estimate(const Eigen::VectorXd& observation) const {
  return policy_net_.forward_vec(observation).maxCoeff();
}

void DuelDdqnAgent::save(std::ostream& out) const {
  io::put_magic(out, kAgentMagic);
  save_agent_config(out, config_);
  io::put_pod<std::int64_t>(out, action_count_);
  io::put_pod<std::int64_t>(out, update_count_);
  policy_net_.save(out);
  target_net_.save(out);
  adam_.save(out);
  buffer_.save(out);
}

void DuelDdqnAgent::load(std::istream& in) {
  action_count_ = io::get_pod<std::int64_t>(in);
  update_count_ = io::get_pod<std::int64_t>(in);
  policy_net_ = MlpNetwork::load(in);
  target_net_ = MlpNetwork::load(in);
  adam_.load(in);
  buffer_.load(in);
}

// ---------------------------------------------------------------------------
// Shared actor-critic pieces

namespace {

/// Gradient of (-entropy_coeff * mean entropy) with respect to one row of
/// preferences, already divided by the batch size.
Eigen::VectorXd entropy_grad_term(const Eigen::VectorXd& probs, double entropy,
                                  double entropy_coeff, double batch) {
  Eigen::VectorXd g(probs.size());
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    g[i] = entropy_coeff * probs[i] * (std::log(std::max(probs[i], 1e-12)) + entropy) / batch;
  }
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// A2C

A2cAgent::A2cAgent(const AgentConfig& config)
    : config_(config),
      actor_net_(config.observation_width, config.hidden_widths, HeadKind::kActionPreferences,
                 config.num_actions),
      critic_net_(config.observation_width, config.hidden_widths, HeadKind::kScalarValue,
                  config.num_actions),
      adam_actor_(config.actor_learning_rate),
      adam_critic_(config.critic_learning_rate),
      actor_schedule_{config.actor_learning_rate, 0.5, config.decay_number, config.total_frames},
      critic_schedule_{config.critic_learning_rate, 0.5, config.decay_number,
                       config.total_frames},
      rollout_(config.rollout_length, config.gamma, /*lambda=*/0.0) {
  Rng init_rng(config.init_seed);
  actor_net_.init_params(init_rng);
  critic_net_.init_params(init_rng);
  adam_actor_.attach(actor_net_.blocks());
  adam_critic_.attach(critic_net_.blocks());
}

int A2cAgent::act(const Eigen::VectorXd& observation, Rng& rng) {
  ++action_count_;
  const Eigen::VectorXd prefs = actor_net_.forward_vec(observation);
  const Eigen::VectorXd probs = softmax_policy(prefs);
  const int action = sample_categorical(probs, rng);
  last_log_prob_ = log_softmax(prefs)[action];
  last_value_ = critic_net_.forward_vec(observation)[0];
  return action;
}

int A2cAgent::greedy_act(const Eigen::VectorXd& observation) const {
  return argmax_row(actor_net_.forward_vec(observation));
}

int A2cAgent::eval_act(const Eigen::VectorXd& observation, Rng& rng, bool /*greedy*/) const {
  // evaluation keeps the stochastic policy for actor-critics
  return sample_categorical(softmax_policy(actor_net_.forward_vec(observation)), rng);
}

void A2cAgent::observe(const Transition& transition) {
  if (rollout_.size() == 0) rollout_actor_version_ = actor_net_.param_version();
  rollout_.push({transition.state, transition.action, last_log_prob_, last_value_,
                 transition.reward, transition.done});
  last_next_state_ = transition.next_state;
  last_done_ = transition.done;
}

Eigen::VectorXd A2cAgent::one_step_targets(const std::vector<RolloutStep>& steps,
                                           double bootstrap_value) const {
  const auto n = static_cast<Eigen::Index>(steps.size());
  if (n == 0) throw UsageError("a2c update: empty rollout");
  Eigen::MatrixXd states(n, critic_net_.input_width());
  for (Eigen::Index t = 0; t < n; ++t) {
    states.row(t) = steps[static_cast<std::size_t>(t)].state.transpose();
  }
  const Eigen::VectorXd values = critic_net_.forward(states).col(0);
  Eigen::VectorXd targets(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& s = steps[static_cast<std::size_t>(t)];
    // next value from the following rollout row; episode boundaries masked
    const double next_value = (t + 1 < n) ? values[t + 1] : bootstrap_value;
    targets[t] = s.reward + (s.done ? 0.0 : config_.gamma * next_value);
  }
  return targets;
}

ActorCriticLosses A2cAgent::compute_losses(const std::vector<RolloutStep>& steps,
                                           const Eigen::VectorXd& td_targets) const {
  const auto n = static_cast<Eigen::Index>(steps.size());
  if (n == 0) throw UsageError("a2c update: empty rollout");
  if (td_targets.size() != n) throw UsageError("a2c update: target length mismatch");
  const double batch = static_cast<double>(n);

  Eigen::MatrixXd states(n, critic_net_.input_width());
  for (Eigen::Index t = 0; t < n; ++t) states.row(t) = steps[static_cast<std::size_t>(t)].state.transpose();

  ForwardCache critic_cache;
  const Eigen::VectorXd values = critic_net_.forward(states, &critic_cache).col(0);
  const Eigen::VectorXd& targets = td_targets;
  const Eigen::VectorXd advantages = targets - values;

  ActorCriticLosses out;
  out.critic_loss = (targets - values).squaredNorm() / batch;
  Eigen::MatrixXd dvalues = (2.0 / batch) * (values - targets);
  out.critic_grads = critic_net_.backward(critic_cache, dvalues);

  ForwardCache actor_cache;
  const Eigen::MatrixXd prefs = actor_net_.forward(states, &actor_cache);
  Eigen::MatrixXd dprefs(n, prefs.cols());
  double actor_loss = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& s = steps[static_cast<std::size_t>(t)];
    const Eigen::VectorXd row = prefs.row(t).transpose();
    const Eigen::VectorXd probs = softmax_policy(row);
    const Eigen::VectorXd logp = log_softmax(row);
    const double entropy = categorical_entropy(probs);
    actor_loss += -advantages[t] * logp[s.action] - config_.entropy_coeff * entropy;

    Eigen::VectorXd grad = probs * (advantages[t] / batch);
    grad[s.action] -= advantages[t] / batch;  // -(adv/T) * (onehot - probs)
    grad += entropy_grad_term(probs, entropy, config_.entropy_coeff, batch);
    dprefs.row(t) = grad.transpose();
  }
  out.actor_loss = actor_loss / batch;
  out.actor_grads = actor_net_.backward(actor_cache, dprefs);
  return out;
}

UpdateResult A2cAgent::maybe_update(Rng& /*rng*/) {
  if (!rollout_.full()) return {};
  if (rollout_actor_version_ != actor_net_.param_version()) {
    throw UsageError("a2c update: rollout was collected by a different policy");
  }
  const double bootstrap =
      last_done_ ? 0.0 : critic_net_.forward_vec(last_next_state_)[0];
  const Eigen::VectorXd targets = one_step_targets(rollout_.steps(), bootstrap);
  ActorCriticLosses losses = compute_losses(rollout_.steps(), targets);

  clip_gradients(losses.actor_grads, config_.grad_clip_norm);
  clip_gradients(losses.critic_grads, config_.grad_clip_norm);
  adam_actor_.set_learning_rate(scheduled_rate(actor_schedule_, action_count_));
  adam_critic_.set_learning_rate(scheduled_rate(critic_schedule_, action_count_));
  adam_actor_.step(actor_net_, losses.actor_grads);
  adam_critic_.step(critic_net_, losses.critic_grads);
  rollout_.clear();

  UpdateResult result;
  result.updated = true;
  result.actor_loss = losses.actor_loss;
  result.critic_loss = losses.critic_loss;
  result.loss = losses.actor_loss + losses.critic_loss;
  return result;
}

double A2cAgent::value_estimate(const Eigen::VectorXd& observation) const {
  return critic_net_.forward_vec(observation)[0];
}

void A2cAgent::save(std::ostream& out) const {
  io::put_magic(out, kAgentMagic);
  save_agent_config(out, config_);
  io::put_pod<std::int64_t>(out, action_count_);
  io::put_pod<double>(out, last_log_prob_);
  io::put_pod<double>(out, last_value_);
  io::put_vector(out, last_next_state_);
  io::put_pod<std::uint8_t>(out, last_done_ ? 1 : 0);
  actor_net_.save(out);
  critic_net_.save(out);
  adam_actor_.save(out);
  adam_critic_.save(out);
  rollout_.save(out);
}

void A2cAgent::load(std::istream& in) {
  action_count_ = io::get_pod<std::int64_t>(in);
  last_log_prob_ = io::get_pod<double>(in);
  last_value_ = io::get_pod<double>(in);
  last_next_state_ = io::get_vector(in);
  last_done_ = io::get_pod<std::uint8_t>(in) != 0;
  actor_net_ = MlpNetwork::load(in);
  critic_net_ = MlpNetwork::load(in);
  adam_actor_.load(in);
  adam_critic_.load(in);
  rollout_.load(in);
  rollout_actor_version_ = actor_net_.param_version();
}

// ---------------------------------------------------------------------------
// PPO

PpoAgent::PpoAgent(const AgentConfig& config)
    : config_(config),
      actor_net_(config.observation_width, config.hidden_widths, HeadKind::kActionPreferences,
                 config.num_actions),
      critic_net_(config.observation_width, config.hidden_widths, HeadKind::kScalarValue,
                  config.num_actions),
      adam_actor_(config.actor_learning_rate),
      adam_critic_(config.critic_learning_rate),
      actor_schedule_{config.actor_learning_rate, 0.5, config.decay_number, config.total_frames},
      critic_schedule_{config.critic_learning_rate, 0.5, config.decay_number,
                       config.total_frames},
      rollout_(config.rollout_length, config.gamma, config.gae_lambda) {
  Rng init_rng(config.init_seed);
  actor_net_.init_params(init_rng);
  critic_net_.init_params(init_rng);
  adam_actor_.attach(actor_net_.blocks());
  adam_critic_.attach(critic_net_.blocks());
}

int PpoAgent::act(const Eigen::VectorXd& observation, Rng& rng) {
  ++action_count_;
  const Eigen::VectorXd prefs = actor_net_.forward_vec(observation);
  const Eigen::VectorXd probs = softmax_policy(prefs);
  const int action = sample_categorical(probs, rng);
  last_log_prob_ = log_softmax(prefs)[action];
  last_value_ = critic_net_.forward_vec(observation)[0];
  return action;
}

int PpoAgent::greedy_act(const Eigen::VectorXd& observation) const {
  return argmax_row(actor_net_.forward_vec(observation));
}

int PpoAgent::eval_act(const Eigen::VectorXd& observation, Rng& rng, bool /*greedy*/) const {
  return sample_categorical(softmax_policy(actor_net_.forward_vec(observation)), rng);
}

void PpoAgent::observe(const Transition& transition) {
  if (rollout_.size() == 0) rollout_actor_version_ = actor_net_.param_version();
  rollout_.push({transition.state, transition.action, last_log_prob_, last_value_,
                 transition.reward, transition.done});
  last_next_state_ = transition.next_state;
  last_done_ = transition.done;
}

ActorCriticLosses PpoAgent::compute_losses(const std::vector<const RolloutStep*>& batch,
                                           const Eigen::VectorXd& advantages,
                                           const Eigen::VectorXd& lambda_returns) const {
  const auto n = static_cast<Eigen::Index>(batch.size());
  const double bsize = static_cast<double>(n);
  const double clip = config_.ppo_clip;

  Eigen::MatrixXd states(n, actor_net_.input_width());
  for (Eigen::Index t = 0; t < n; ++t) states.row(t) = batch[static_cast<std::size_t>(t)]->state.transpose();

  ForwardCache actor_cache;
  const Eigen::MatrixXd prefs = actor_net_.forward(states, &actor_cache);
  Eigen::MatrixXd dprefs(n, prefs.cols());
  double actor_loss = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& s = *batch[static_cast<std::size_t>(t)];
    const Eigen::VectorXd row = prefs.row(t).transpose();
    const Eigen::VectorXd probs = softmax_policy(row);
    const Eigen::VectorXd logp = log_softmax(row);
    const double entropy = categorical_entropy(probs);
    const double ratio = std::exp(logp[s.action] - s.log_prob);
    const double clipped_ratio = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    const double adv = advantages[t];
    const double unclipped = ratio * adv;
    const double clipped = clipped_ratio * adv;
    actor_loss += -std::min(unclipped, clipped) - config_.entropy_coeff * entropy;

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(probs.size());
    if (unclipped <= clipped) {
      // gradient flows through the ratio: d ratio / d prefs = ratio * (onehot - probs)
      const double coeff = -adv * ratio / bsize;
      grad = probs * (-coeff);
      grad[s.action] += coeff;
    }
    grad += entropy_grad_term(probs, entropy, config_.entropy_coeff, bsize);
    dprefs.row(t) = grad.transpose();
  }

  ForwardCache critic_cache;
  const Eigen::VectorXd values = critic_net_.forward(states, &critic_cache).col(0);

  ActorCriticLosses out;
  out.actor_loss = actor_loss / bsize;
  out.actor_grads = actor_net_.backward(actor_cache, dprefs);
  out.critic_loss = (lambda_returns - values).squaredNorm() / bsize;
  Eigen::MatrixXd dvalues = (2.0 / bsize) * (values - lambda_returns);
  out.critic_grads = critic_net_.backward(critic_cache, dvalues);
  return out;
}

UpdateResult PpoAgent::maybe_update(Rng& rng) {
  if (!rollout_.full()) return {};
  if (rollout_actor_version_ != actor_net_.param_version()) {
    throw UsageError("ppo update: rollout was collected by a different policy");
  }
  const double bootstrap =
      last_done_ ? 0.0 : critic_net_.forward_vec(last_next_state_)[0];
  const GaeResult gae = compute_gae(rollout_, bootstrap);
  const std::vector<RolloutStep> steps = rollout_.steps();  // keep past clear()
  const std::size_t total = steps.size();
  const std::size_t mb = config_.ppo_batch_size == 0
                             ? total
                             : std::min<std::size_t>(config_.ppo_batch_size, total);

  double actor_loss_sum = 0.0, critic_loss_sum = 0.0;
  long minibatches = 0;

  for (long epoch = 0; epoch < config_.ppo_epochs; ++epoch) {
    const auto order = shuffled_indices(total, rng);
    for (std::size_t start = 0; start < total; start += mb) {
      const std::size_t count = std::min(mb, total - start);
      std::vector<const RolloutStep*> batch(count);
      Eigen::VectorXd adv(static_cast<Eigen::Index>(count));
      Eigen::VectorXd ret(static_cast<Eigen::Index>(count));
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t idx = order[start + i];
        batch[i] = &steps[idx];
        adv[static_cast<Eigen::Index>(i)] = gae.advantages[static_cast<Eigen::Index>(idx)];
        ret[static_cast<Eigen::Index>(i)] = gae.lambda_returns[static_cast<Eigen::Index>(idx)];
      }
      ActorCriticLosses losses = compute_losses(batch, normalize_advantages(adv), ret);
      clip_gradients(losses.actor_grads, config_.grad_clip_norm);
      clip_gradients(losses.critic_grads, config_.grad_clip_norm);
      adam_actor_.set_learning_rate(scheduled_rate(actor_schedule_, action_count_));
      adam_critic_.set_learning_rate(scheduled_rate(critic_schedule_, action_count_));
      adam_actor_.step(actor_net_, losses.actor_grads);
      adam_critic_.step(critic_net_, losses.critic_grads);
      actor_loss_sum += losses.actor_loss;
      critic_loss_sum += losses.critic_loss;
      ++minibatches;
    }
  }
  rollout_.clear();

  UpdateResult result;
  result.updated = true;
  result.actor_loss = actor_loss_sum / static_cast<double>(minibatches);
  result.critic_loss = critic_loss_sum / static_cast<double>(minibatches);
  result.loss = result.actor_loss + result.critic_loss;
  return result;
}

double PpoAgent::value_estimate(const Eigen::VectorXd& observation) const {
  return critic_net_.forward_vec(observation)[0];
}

void PpoAgent::save(std::ostream& out) const {
  io::put_magic(out, kAgentMagic);
  save_agent_config(out, config_);
  io::put_pod<std::int64_t>(out, action_count_);
  io::put_pod<double>(out, last_log_prob_);
  io::put_pod<double>(out, last_value_);
  io::put_vector(out, last_next_state_);
  io::put_pod<std::uint8_t>(out, last_done_ ? 1 : 0);
  actor_net_.save(out);
  critic_net_.save(out);
  adam_actor_.save(out);
  adam_critic_.save(out);
  rollout_.save(out);
}

void PpoAgent::load(std::istream& in) {
  action_count_ = io::get_pod<std::int64_t>(in);
  last_log_prob_ = io::get_pod<double>(in);
  last_value_ = io::get_pod<double>(in);
  last_next_state_ = io::get_vector(in);
  last_done_ = io::get_pod<std::uint8_t>(in) != 0;
  actor_net_ = MlpNetwork::load(in);
  critic_net_ = MlpNetwork::load(in);
  adam_actor_.load(in);
  adam_critic_.load(in);
  rollout_.load(in);
  rollout_actor_version_ = actor_net_.param_version();
}

// ---------------------------------------------------------------------------
// Random baseline

RandomAgent::RandomAgent(int observation_width, int num_actions)
    : observation_width_(observation_width), num_actions_(num_actions) {}

int RandomAgent::act(const Eigen::VectorXd& /*observation*/, Rng& rng) {
  ++action_count_;
  return rng.uniform_int(num_actions_);
}

int RandomAgent::greedy_act(const Eigen::VectorXd& /*observation*/) const { return 0; }

int RandomAgent::eval_act(const Eigen::VectorXd& /*observation*/, Rng& rng,
                          bool /*greedy*/) const {
  return rng.uniform_int(num_actions_);
}

void RandomAgent::observe(const Transition& /*transition*/) {}

UpdateResult RandomAgent::maybe_update(Rng& /*rng*/) { return {}; }

double RandomAgent::value_estimate(const Eigen::VectorXd& /*observation*/) const { return 0.0; }

void RandomAgent::save(std::ostream& out) const {
  io::put_magic(out, kAgentMagic);
  AgentConfig c;
  c.kind = kind_;
  c.observation_width = observation_width_;
  c.num_actions = num_actions_;
  save_agent_config(out, c);
  io::put_pod<std::int64_t>(out, action_count_);
}

void RandomAgent::load(std::istream& in) { action_count_ = io::get_pod<std::int64_t>(in); }

// ---------------------------------------------------------------------------
// Factory

AgentConfig default_agent_config(const std::string& kind, int observation_width,
                                 long total_frames, std::uint64_t init_seed, double gamma) {
  AgentConfig c;
  c.kind = kind;
  c.observation_width = observation_width;
  c.total_frames = total_frames;
  c.init_seed = init_seed;
  c.gamma = gamma;
  if (kind == "dqn") {
    c.learning_rate = 0.002357;
    c.exploration_decay = 0.7052;
    c.batch_size = 256;
    c.buffer_size = 32768;
    c.target_update_every = 12;
    c.decay_number = 6;
  } else if (kind == "duelddqn") {
    c.learning_rate = 0.004133;
    c.exploration_decay = 0.5307;
    c.batch_size = 128;
    c.buffer_size = 32768;
    c.target_update_every = 54;
    c.decay_number = 10;
    c.per_alpha = 0.213;
    c.per_beta = 0.7389;
  } else if (kind == "a2c") {
    c.actor_learning_rate = 0.0002052;
    c.critic_learning_rate = 0.002627;
    c.entropy_coeff = 0.001672;
    c.rollout_length = 32;
    c.decay_number = 4;
  } else if (kind == "ppo") {
    c.actor_learning_rate = 0.0003633;
    c.critic_learning_rate = 0.004864;
    c.entropy_coeff = 0.0001411;
    c.rollout_length = 2048;
    c.ppo_batch_size = 256;
    c.decay_number = 200;
    c.gae_lambda = 0.8845;
    c.ppo_clip = 0.2762;
    c.ppo_epochs = 50;
  } else if (kind == "random") {
    // nothing to configure
  } else {
    throw ConfigError("unknown agent kind '" + kind + "'");
  }
  return c;
}

void apply_override(AgentConfig& c, const std::string& key, double value) {
  const bool dqn_family = c.kind == "dqn" || c.kind == "duelddqn";
  const bool ac_family = c.kind == "a2c" || c.kind == "ppo";

  auto reject = [&]() {
    throw ConfigError("override '" + key + "' does not apply to agent kind '" + c.kind + "'");
  };

  if (key == "hidden_width") {
    const int w = static_cast<int>(value);
    if (w <= 0) throw ConfigError("hidden_width must be positive");
    for (auto& width : c.hidden_widths) width = w;
  } else if (key == "hidden_layers") {
    const int layers = static_cast<int>(value);
    if (layers <= 0) throw ConfigError("hidden_layers must be positive");
    const int w = c.hidden_widths.empty() ? 256 : c.hidden_widths.front();
    c.hidden_widths.assign(static_cast<std::size_t>(layers), w);
  } else if (key == "grad_clip") {
    c.grad_clip_norm = value;
  } else if (key == "lr") {
    if (!dqn_family) reject();
    c.learning_rate = value;
  } else if (key == "exploration_decay") {
    if (!dqn_family) reject();
    c.exploration_decay = value;
  } else if (key == "batch_size") {
    if (c.kind == "ppo") {
      c.ppo_batch_size = static_cast<std::size_t>(value);
    } else if (dqn_family) {
      c.batch_size = static_cast<std::size_t>(value);
    } else {
      reject();  // A2C consumes the whole rollout at once
    }
  } else if (key == "buffer_size") {
    if (!dqn_family) reject();
    c.buffer_size = static_cast<std::size_t>(value);
  } else if (key == "target_update") {
    if (!dqn_family) reject();
    c.target_update_every = static_cast<long>(value);
  } else if (key == "decay_number") {
    c.decay_number = static_cast<long>(value);
  } else if (key == "per_alpha") {
    if (c.kind != "duelddqn") reject();
    c.per_alpha = value;
  } else if (key == "per_beta") {
    if (c.kind != "duelddqn") reject();
    c.per_beta = value;
  } else if (key == "double_q_standard") {
    if (c.kind != "duelddqn") reject();
    c.double_q_standard_convention = value != 0.0;
  } else if (key == "lr_actor") {
    if (!ac_family) reject();
    c.actor_learning_rate = value;
  } else if (key == "lr_critic") {
    if (!ac_family) reject();
    c.critic_learning_rate = value;
  } else if (key == "entropy_coeff") {
    if (!ac_family) reject();
    c.entropy_coeff = value;
  } else if (key == "rollout_length") {
    if (!ac_family) reject();
    c.rollout_length = static_cast<std::size_t>(value);
  } else if (key == "lambda") {
    if (c.kind != "ppo") reject();
    c.gae_lambda = value;
  } else if (key == "clip") {
    if (c.kind != "ppo") reject();
    c.ppo_clip = value;
  } else if (key == "epochs") {
    if (c.kind != "ppo") reject();
    c.ppo_epochs = static_cast<long>(value);
  } else {
    throw ConfigError("unknown hyperparameter override '" + key + "'");
  }
}

std::unique_ptr<Agent> make_agent(const AgentConfig& config) {
  if (config.kind == "dqn") return std::make_unique<DqnAgent>(config);
  if (config.kind == "duelddqn") return std::make_unique<DuelDdqnAgent>(config);
  if (config.kind == "a2c") return std::make_unique<A2cAgent>(config);
  if (config.kind == "ppo") return std::make_unique<PpoAgent>(config);
  if (config.kind == "random") {
    return std::make_unique<RandomAgent>(config.observation_width, config.num_actions);
  }
  throw ConfigError("unknown agent kind '" + config.kind + "'");
}

std::unique_ptr<Agent> make_agent(const std::string& kind, int observation_width,
                                  long total_frames, std::uint64_t init_seed,
                                  const std::map<std::string, double>& overrides, double gamma) {
  AgentConfig config = default_agent_config(kind, observation_width, total_frames, init_seed, gamma);
  for (const auto& [key, value] : overrides) apply_override(config, key, value);
  return make_agent(config);
}

std::unique_ptr<Agent> load_agent(std::istream& in) {
  io::expect_magic(in, kAgentMagic);
  AgentConfig config = load_agent_config(in);
  auto agent = make_agent(config);
  agent->load(in);
  return agent;
}

std::unique_ptr<Agent> load_agent_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  return load_agent(in);
}

void save_agent_file(const Agent& agent, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  agent.save(out);
}

}  // namespace ayrl
