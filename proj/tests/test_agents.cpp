#include <doctest.h>

#include <cmath>
#include <functional>
#include <sstream>

#include "ayrl/agents.hpp"

using namespace ayrl;

namespace {

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

AgentConfig tiny_config(const std::string& kind, std::uint64_t seed = 1) {
  AgentConfig c = default_agent_config(kind, 3, 10000, seed);
  c.hidden_widths = {6, 6};
  if (kind == "dqn" || kind == "duelddqn") {
    c.batch_size = 4;
    c.buffer_size = 64;
    c.target_update_every = 3;
  } else {
    c.rollout_length = 6;
    c.ppo_batch_size = 3;
    c.ppo_epochs = 2;
  }
  return c;
}

/// Sets every weight and bias to zero and every head bias to `head_bias`, so
/// the network outputs a constant.
void make_constant_net(MlpNetwork& net, double head_bias) {
  for (auto& block : net.blocks()) {
    block.weights.setZero();
    block.biases.setZero();
  }
  net.blocks().back().biases.setConstant(head_bias);
  net.bump_version();
}

Transition transition(const Eigen::VectorXd& s, int a, double r, const Eigen::VectorXd& s2,
                      bool done) {
  return {s, a, r, s2, done};
}

/// Nonzero biases keep pre-activations away from exact relu kinks, where
/// central differences stop being derivatives.
void jitter_biases(MlpNetwork& net, Rng& rng) {
  for (auto& block : net.blocks()) {
    for (Eigen::Index i = 0; i < block.biases.size(); ++i) {
      block.biases[i] += rng.uniform(0.01, 0.05);
    }
  }
  net.bump_version();
}

double fd_max_rel_error(MlpNetwork& net, const std::function<double()>& loss,
                        const GradientBundle& analytic, double step = 1e-6) {
  double worst = 0.0;
  for (std::size_t b = 0; b < net.blocks().size(); ++b) {
    auto probe = [&](double& param, double grad) {
      const double saved = param;
      param = saved + step;
      net.bump_version();
      const double up = loss();
      param = saved - step;
      net.bump_version();
      const double down = loss();
      param = saved;
      net.bump_version();
      const double numeric = (up - down) / (2.0 * step);
      if (std::abs(numeric) < 1e-6 && std::abs(grad) < 1e-6) return;  // fd noise floor
      const double scale = std::max(std::abs(numeric), std::abs(grad));
      worst = std::max(worst, std::abs(numeric - grad) / scale);
    };
    auto& block = net.blocks()[b];
    const auto& gb = analytic.blocks()[b];
    for (Eigen::Index r = 0; r < block.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < block.weights.cols(); ++c)
        probe(block.weights(r, c), gb.weights(r, c));
    for (Eigen::Index i = 0; i < block.biases.size(); ++i) probe(block.biases[i], gb.biases[i]);
  }
  return worst;
}

}  // namespace

TEST_CASE("epsilon schedule: clamp, floor and hand value") {
  const EpsilonSchedule schedule{1.0, 0.5, 0.01};
  CHECK(epsilon_value(schedule, 0) == 1.0);
  CHECK(epsilon_value(schedule, 1) == 1.0);  // 1.01 clamped
  CHECK(epsilon_value(schedule, 10000) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(epsilon_value(schedule, 100000000) == doctest::Approx(0.01).epsilon(1e-3));

  double prev = epsilon_value(schedule, 1);
  for (long t = 2; t < 2000; ++t) {
    const double eps = epsilon_value(schedule, t);
    CHECK(eps <= prev);
    CHECK(eps >= 0.01);
    prev = eps;
  }
}

TEST_CASE("dqn act: greedy argmax and lowest-index tie break") {
  DqnAgent agent(tiny_config("dqn"));
  make_constant_net(agent.mutable_policy_net(), 0.0);
  agent.mutable_policy_net().blocks().back().biases = Eigen::Vector4d(1, 5, 2, 0);
  agent.mutable_policy_net().bump_version();
  CHECK(agent.greedy_act(vec3(0.5, 0.5, 0.5)) == 1);

  agent.mutable_policy_net().blocks().back().biases = Eigen::Vector4d(3, 3, 0, 0);
  agent.mutable_policy_net().bump_version();
  CHECK(agent.greedy_act(vec3(0.5, 0.5, 0.5)) == 0);
}

TEST_CASE("dqn act: fully exploratory policy is uniform within 3 sigma") {
  AgentConfig config = tiny_config("dqn");
  config.exploration_decay = 0.0;  // epsilon stays at 1
  DqnAgent agent(config);
  Rng rng(6);
  long counts[4] = {0, 0, 0, 0};
  const long draws = 100000;
  for (long i = 0; i < draws; ++i) counts[agent.act(vec3(0.5, 0.5, 0.5), rng)]++;
  const double sigma = std::sqrt(draws * 0.25 * 0.75);
  for (long count : counts) CHECK(std::abs(count - draws * 0.25) < 3.0 * sigma);
}

TEST_CASE("double_q_target: printed convention selects via target, evaluates via policy") {
  MlpNetwork policy(1, {}, HeadKind::kActionValues, 2);
  MlpNetwork target(1, {}, HeadKind::kActionValues, 2);
  policy.blocks()[0].biases = Eigen::Vector2d(4, 1);
  target.blocks()[0].biases = Eigen::Vector2d(0, 9);
  policy.bump_version();
  target.bump_version();

  const Eigen::VectorXd next = Eigen::VectorXd::Constant(1, 0.0);
  CHECK(double_q_target(policy, target, 0.0, next, false, 1.0) == doctest::Approx(1.0));
  // standard convention: select via policy (argmax 0), evaluate via target
  CHECK(double_q_target(policy, target, 0.0, next, false, 1.0, true) == doctest::Approx(0.0));
  // terminal transitions ignore both networks
  CHECK(double_q_target(policy, target, 2.5, next, true, 1.0) == doctest::Approx(2.5));

  // identical networks reduce to the vanilla max target
  MlpNetwork twin = policy;
  CHECK(double_q_target(policy, twin, 0.5, next, false, 0.9) ==
        doctest::Approx(0.5 + 0.9 * 4.0));
}

TEST_CASE("dqn update: exact target gives zero loss; unit error gives unit loss") {
  AgentConfig config = tiny_config("dqn");
  config.batch_size = 1;
  DqnAgent agent(config);
  make_constant_net(agent.mutable_policy_net(), 2.0);

  const Transition done_hit = transition(vec3(0.5, 0.5, 0.5), 0, 2.0, vec3(0.4, 0.5, 0.5), true);
  std::vector<const Transition*> batch{&done_hit};
  const Eigen::VectorXd t1 = agent.batch_targets(batch);
  CHECK(t1[0] == doctest::Approx(2.0));
  CHECK(agent.loss_and_gradients(batch, t1).first == doctest::Approx(0.0));

  make_constant_net(agent.mutable_policy_net(), 0.0);
  const Transition done_miss = transition(vec3(0.5, 0.5, 0.5), 1, 1.0, vec3(0.4, 0.5, 0.5), true);
  std::vector<const Transition*> batch2{&done_miss};
  const Eigen::VectorXd t2 = agent.batch_targets(batch2);
  CHECK(agent.loss_and_gradients(batch2, t2).first == doctest::Approx(1.0));
}

TEST_CASE("dqn update: no-op below batch size; target copies every C updates") {
  AgentConfig config = tiny_config("dqn");
  config.batch_size = 2;
  config.target_update_every = 3;
  DqnAgent agent(config);
  Rng rng(3);

  CHECK(!agent.maybe_update(rng).updated);  // empty buffer

  agent.observe(transition(vec3(0.5, 0.5, 0.5), 0, 1.0, vec3(0.4, 0.5, 0.5), false));
  CHECK(!agent.maybe_update(rng).updated);  // one short of a batch
  agent.observe(transition(vec3(0.4, 0.5, 0.5), 1, 0.5, vec3(0.3, 0.5, 0.5), true));

  const auto snapshot = agent.target_net().blocks();
  for (int update = 1; update <= 3; ++update) {
    CHECK(agent.maybe_update(rng).updated);
    if (update < 3) {
      // frozen between copies, bit for bit
      for (std::size_t i = 0; i < snapshot.size(); ++i) {
        CHECK(agent.target_net().blocks()[i].weights == snapshot[i].weights);
      }
      bool any_param_differs = false;
      for (std::size_t i = 0; i < snapshot.size(); ++i) {
        if (agent.target_net().blocks()[i].weights != agent.policy_net().blocks()[i].weights ||
            agent.target_net().blocks()[i].biases != agent.policy_net().blocks()[i].biases) {
          any_param_differs = true;
        }
      }
      CHECK(any_param_differs);
    }
  }
  for (std::size_t i = 0; i < snapshot.size(); ++i) {
    CHECK(agent.target_net().blocks()[i].weights == agent.policy_net().blocks()[i].weights);
    CHECK(agent.target_net().blocks()[i].biases == agent.policy_net().blocks()[i].biases);
  }
}

TEST_CASE("dqn loss gradient matches finite differences") {
  AgentConfig config = tiny_config("dqn");
  DqnAgent agent(config);
  Rng rng(11);
  jitter_biases(agent.mutable_policy_net(), rng);
  std::vector<Transition> storage;
  for (int i = 0; i < 4; ++i) {
    storage.push_back(transition(vec3(rng.uniform(), rng.uniform(), rng.uniform()), i % 4,
                                 rng.uniform(-1, 1),
                                 vec3(rng.uniform(), rng.uniform(), rng.uniform()), i == 3));
  }
  std::vector<const Transition*> batch;
  for (const auto& t : storage) batch.push_back(&t);

  const Eigen::VectorXd targets = agent.batch_targets(batch);
  const auto [loss, grads] = agent.loss_and_gradients(batch, targets);
  auto loss_fn = [&]() { return agent.loss_and_gradients(batch, targets).first; };
  CHECK(fd_max_rel_error(agent.mutable_policy_net(), loss_fn, grads) < 1e-4);
  CHECK(loss > 0.0);
}

TEST_CASE("duelddqn loss gradient matches finite differences and reports td errors") {
  AgentConfig config = tiny_config("duelddqn");
  DuelDdqnAgent agent(config);
  Rng rng(13);
  jitter_biases(agent.mutable_policy_net(), rng);
  std::vector<Transition> storage;
  for (int i = 0; i < 4; ++i) {
    storage.push_back(transition(vec3(rng.uniform(), rng.uniform(), rng.uniform()), i % 4,
                                 rng.uniform(-1, 1),
                                 vec3(rng.uniform(), rng.uniform(), rng.uniform()), i == 0));
  }
  std::vector<const Transition*> batch;
  for (const auto& t : storage) batch.push_back(&t);
  Eigen::VectorXd weights(4);
  weights << 1.0, 0.5, 0.25, 0.8;

  const Eigen::VectorXd targets = agent.batch_targets(batch);
  const auto [loss, grads, tds] = agent.loss_and_gradients(batch, targets, weights);
  auto loss_fn = [&]() {
    return std::get<0>(agent.loss_and_gradients(batch, targets, weights));
  };
  CHECK(fd_max_rel_error(agent.mutable_policy_net(), loss_fn, grads) < 1e-4);
  CHECK(tds.size() == 4);

  // with unit weights the loss reduces to the unweighted double-Q regression
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(4);
  const double unweighted = std::get<0>(agent.loss_and_gradients(batch, targets, ones));
  double manual = 0.0;
  for (int j = 0; j < 4; ++j) {
    const Eigen::VectorXd q = agent.policy_net().forward_vec(storage[j].state);
    manual += std::pow(q[storage[j].action] - targets[j], 2.0);
  }
  CHECK(unweighted == doctest::Approx(manual / 4.0).epsilon(1e-12));
}

TEST_CASE("duelddqn update: priorities fall to the floor on zero td error") {
  AgentConfig config = tiny_config("duelddqn");
  config.batch_size = 2;
  DuelDdqnAgent agent(config);
  Rng rng(17);
  // make every Q value and reward zero so targets and predictions coincide
  make_constant_net(agent.mutable_policy_net(), 0.0);
  agent.observe(transition(vec3(0.1, 0.2, 0.3), 0, 0.0, vec3(0.2, 0.2, 0.3), true));
  agent.observe(transition(vec3(0.3, 0.2, 0.3), 1, 0.0, vec3(0.2, 0.1, 0.3), true));
  CHECK(agent.maybe_update(rng).updated);
  CHECK(agent.buffer().priority_of(0) == doctest::Approx(PrioritizedBuffer::kPriorityFloor));
  CHECK(agent.buffer().priority_of(1) == doctest::Approx(PrioritizedBuffer::kPriorityFloor));
}

TEST_CASE("a2c: critic loss vanishes for an exact value function") {
  AgentConfig config = tiny_config("a2c");
  A2cAgent agent(config);
  make_constant_net(agent.mutable_critic_net(), 0.0);

  std::vector<RolloutStep> steps;
  for (int t = 0; t < 4; ++t) {
    steps.push_back({vec3(0.1 * t, 0.5, 0.5), t % 4, -1.2, 0.0, 0.0, false});
  }
  const Eigen::VectorXd targets = agent.one_step_targets(steps, 0.0);
  const ActorCriticLosses losses = agent.compute_losses(steps, targets);
  CHECK(losses.critic_loss == doctest::Approx(0.0));
  // zero advantage and zero entropy coefficient: no actor gradient at all
  AgentConfig plain = config;
  plain.entropy_coeff = 0.0;
  A2cAgent bare(plain);
  make_constant_net(bare.mutable_critic_net(), 0.0);
  const ActorCriticLosses quiet = bare.compute_losses(steps, targets);
  CHECK(quiet.actor_grads.global_norm() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("a2c losses match finite differences") {
  AgentConfig config = tiny_config("a2c");
  A2cAgent agent(config);
  Rng rng(19);
  jitter_biases(agent.mutable_actor_net(), rng);
  jitter_biases(agent.mutable_critic_net(), rng);
  std::vector<RolloutStep> steps;
  for (int t = 0; t < 6; ++t) {
    const Eigen::VectorXd s = vec3(rng.uniform(), rng.uniform(), rng.uniform());
    steps.push_back({s, rng.uniform_int(4), 0.0, 0.0, rng.uniform(-1, 1), t == 2});
  }
  const double bootstrap = rng.uniform(-1, 1);
  const Eigen::VectorXd targets = agent.one_step_targets(steps, bootstrap);
  const ActorCriticLosses losses = agent.compute_losses(steps, targets);

  auto actor_loss = [&]() { return agent.compute_losses(steps, targets).actor_loss; };
  CHECK(fd_max_rel_error(agent.mutable_actor_net(), actor_loss, losses.actor_grads) < 1e-4);
  auto critic_loss = [&]() { return agent.compute_losses(steps, targets).critic_loss; };
  CHECK(fd_max_rel_error(agent.mutable_critic_net(), critic_loss, losses.critic_grads) < 1e-4);
}

TEST_CASE("a2c update raises the log-probability of a rewarded action") {
  AgentConfig config = tiny_config("a2c");
  config.rollout_length = 1;
  config.entropy_coeff = 0.0;
  A2cAgent agent(config);
  Rng rng(23);
  const Eigen::VectorXd obs = vec3(0.5, 0.5, 0.5);

  const int action = agent.act(obs, rng);
  const double logp_before = log_softmax(agent.actor_net().forward_vec(obs))[action];
  agent.observe(transition(obs, action, 10.0, vec3(0.4, 0.5, 0.5), true));
  CHECK(agent.maybe_update(rng).updated);
  const double logp_after = log_softmax(agent.actor_net().forward_vec(obs))[action];
  CHECK(logp_after > logp_before);
  CHECK(agent.rollout().size() == 0);  // consumed whole, then cleared
}

TEST_CASE("a2c update rejects a rollout collected by different parameters") {
  AgentConfig config = tiny_config("a2c");
  config.rollout_length = 2;
  A2cAgent agent(config);
  Rng rng(29);
  const Eigen::VectorXd obs = vec3(0.5, 0.5, 0.5);
  for (int i = 0; i < 2; ++i) {
    const int action = agent.act(obs, rng);
    agent.observe(transition(obs, action, 0.1, obs, false));
  }
  agent.mutable_actor_net().bump_version();
  CHECK_THROWS_AS((void)agent.maybe_update(rng), UsageError);
}

TEST_CASE("ppo: clip arithmetic on single-step batches") {
  AgentConfig config = tiny_config("ppo");
  config.entropy_coeff = 0.0;
  config.ppo_clip = 0.2;
  PpoAgent agent(config);
  const Eigen::VectorXd obs = vec3(0.5, 0.5, 0.5);
  const int action = 1;
  const double logp_now = log_softmax(agent.actor_net().forward_vec(obs))[action];

  RolloutStep step{obs, action, logp_now - std::log(2.0), 0.0, 0.0, false};  // ratio 2
  Eigen::VectorXd adv(1), ret(1);
  adv << 1.0;
  ret << 0.0;
  std::vector<const RolloutStep*> batch{&step};
  CHECK(agent.compute_losses(batch, adv, ret).actor_loss == doctest::Approx(-1.2).epsilon(1e-9));

  RolloutStep half{obs, action, logp_now + std::log(2.0), 0.0, 0.0, false};  // ratio 0.5
  adv << -1.0;
  std::vector<const RolloutStep*> batch2{&half};
  CHECK(agent.compute_losses(batch2, adv, ret).actor_loss == doctest::Approx(0.8).epsilon(1e-9));

  // before any update the stored log-prob equals the current one: ratio 1
  RolloutStep fresh{obs, action, logp_now, 0.0, 0.0, false};
  adv << 0.37;
  std::vector<const RolloutStep*> batch3{&fresh};
  CHECK(agent.compute_losses(batch3, adv, ret).actor_loss ==
        doctest::Approx(-0.37).epsilon(1e-12));
}

TEST_CASE("ppo losses match finite differences") {
  AgentConfig config = tiny_config("ppo");
  PpoAgent agent(config);
  Rng rng(31);
  jitter_biases(agent.mutable_actor_net(), rng);
  jitter_biases(agent.mutable_critic_net(), rng);
  std::vector<RolloutStep> storage;
  for (int t = 0; t < 5; ++t) {
    const Eigen::VectorXd s = vec3(rng.uniform(), rng.uniform(), rng.uniform());
    // old log-probs close to but distinct from the current policy
    const int a = rng.uniform_int(4);
    const double logp_old = log_softmax(agent.actor_net().forward_vec(s))[a] + rng.uniform(-0.3, 0.3);
    storage.push_back({s, a, logp_old, 0.0, 0.0, false});
  }
  std::vector<const RolloutStep*> batch;
  for (const auto& s : storage) batch.push_back(&s);
  Eigen::VectorXd adv(5), ret(5);
  for (int i = 0; i < 5; ++i) {
    adv[i] = rng.uniform(-2, 2);
    ret[i] = rng.uniform(-2, 2);
  }

  const ActorCriticLosses losses = agent.compute_losses(batch, adv, ret);
  auto actor_loss = [&]() { return agent.compute_losses(batch, adv, ret).actor_loss; };
  CHECK(fd_max_rel_error(agent.mutable_actor_net(), actor_loss, losses.actor_grads) < 1e-4);
  auto critic_loss = [&]() { return agent.compute_losses(batch, adv, ret).critic_loss; };
  CHECK(fd_max_rel_error(agent.mutable_critic_net(), critic_loss, losses.critic_grads) < 1e-4);
}

TEST_CASE("ppo full update runs epochs and clears the rollout") {
  AgentConfig config = tiny_config("ppo");
  PpoAgent agent(config);
  Rng rng(37);
  Eigen::VectorXd obs = vec3(0.5, 0.5, 0.5);
  for (std::size_t i = 0; i < config.rollout_length; ++i) {
    const int action = agent.act(obs, rng);
    const Eigen::VectorXd next = vec3(rng.uniform(), rng.uniform(), rng.uniform());
    agent.observe(transition(obs, action, rng.uniform(0, 1), next, i % 5 == 4));
    obs = next;
  }
  const UpdateResult result = agent.maybe_update(rng);
  CHECK(result.updated);
  CHECK(agent.rollout().size() == 0);
  CHECK(std::isfinite(result.actor_loss));
  CHECK(std::isfinite(result.critic_loss));
}

TEST_CASE("advantage normalization: zero mean, unit deviation, degenerate floor") {
  Eigen::VectorXd adv(6);
  adv << 3.0, -1.5, 0.25, 7.0, -2.0, 0.5;
  const Eigen::VectorXd normd = normalize_advantages(adv);
  CHECK(std::abs(normd.mean()) < 1e-10);
  const double stddev =
      std::sqrt((normd.array() - normd.mean()).square().sum() / normd.size());
  CHECK(std::abs(stddev - 1.0) < 1e-6);

  Eigen::VectorXd flat = Eigen::VectorXd::Constant(4, 2.5);
  CHECK(normalize_advantages(flat).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("agent factory: table defaults and override handling") {
  const AgentConfig dqn = default_agent_config("dqn", 3, 500000, 0);
  CHECK(dqn.learning_rate == doctest::Approx(0.002357));
  CHECK(dqn.exploration_decay == doctest::Approx(0.7052));
  CHECK(dqn.batch_size == 256);
  CHECK(dqn.buffer_size == 32768);
  CHECK(dqn.target_update_every == 12);
  CHECK(dqn.decay_number == 6);

  const AgentConfig duel = default_agent_config("duelddqn", 3, 500000, 0);
  CHECK(duel.learning_rate == doctest::Approx(0.004133));
  CHECK(duel.exploration_decay == doctest::Approx(0.5307));
  CHECK(duel.batch_size == 128);
  CHECK(duel.target_update_every == 54);
  CHECK(duel.per_alpha == doctest::Approx(0.213));
  CHECK(duel.per_beta == doctest::Approx(0.7389));
  CHECK(duel.decay_number == 10);

  const AgentConfig a2c = default_agent_config("a2c", 3, 500000, 0);
  CHECK(a2c.actor_learning_rate == doctest::Approx(0.0002052));
  CHECK(a2c.critic_learning_rate == doctest::Approx(0.002627));
  CHECK(a2c.entropy_coeff == doctest::Approx(0.001672));
  CHECK(a2c.rollout_length == 32);
  CHECK(a2c.decay_number == 4);

  const AgentConfig ppo = default_agent_config("ppo", 3, 500000, 0);
  CHECK(ppo.actor_learning_rate == doctest::Approx(0.0003633));
  CHECK(ppo.critic_learning_rate == doctest::Approx(0.004864));
  CHECK(ppo.entropy_coeff == doctest::Approx(0.0001411));
  CHECK(ppo.ppo_batch_size == 256);
  CHECK(ppo.rollout_length == 2048);
  CHECK(ppo.decay_number == 200);
  CHECK(ppo.gae_lambda == doctest::Approx(0.8845));
  CHECK(ppo.ppo_clip == doctest::Approx(0.2762));

  auto agent = make_agent("dqn", 3, 500000, 0, {{"batch_size", 64}});
  CHECK(agent->kind() == "dqn");
  CHECK_THROWS_AS((void)make_agent("sarsa", 3, 500000, 0), ConfigError);
  CHECK_THROWS_AS((void)make_agent("dqn", 3, 500000, 0, {{"lambda", 0.5}}), ConfigError);
  CHECK_THROWS_AS((void)make_agent("a2c", 3, 500000, 0, {{"batch_size", 64}}), ConfigError);
  CHECK_THROWS_AS((void)make_agent("dqn", 3, 500000, 0, {{"not_a_key", 1.0}}), ConfigError);
}

TEST_CASE("checkpoints resume the exact training trajectory") {
  AgentConfig config = tiny_config("dqn", 99);
  config.batch_size = 4;
  DqnAgent agent(config);

  Rng stream(7);   // produces the synthetic experience
  Rng actions(8);  // drives the agent
  auto drive = [&](Agent& a, Rng& act_rng, Rng& data_rng, int steps) {
    for (int i = 0; i < steps; ++i) {
      const Eigen::VectorXd s = vec3(data_rng.uniform(), data_rng.uniform(), data_rng.uniform());
      const Eigen::VectorXd s2 = vec3(data_rng.uniform(), data_rng.uniform(), data_rng.uniform());
      const int action = a.act(s, act_rng);
      a.observe(transition(s, action, data_rng.uniform(-1, 1), s2, i % 7 == 6));
      (void)a.maybe_update(act_rng);
    }
  };
  drive(agent, actions, stream, 60);

  std::stringstream buffer(std::ios::in | std::ios::out | std::ios::binary);
  agent.save(buffer);
  std::stringstream act_state, data_state;
  actions.save(act_state);
  stream.save(data_state);

  auto resumed = load_agent(buffer);
  Rng actions2(0), stream2(0);
  actions2.load(act_state);
  stream2.load(data_state);

  drive(agent, actions, stream, 40);
  drive(*resumed, actions2, stream2, 40);

  auto* twin = dynamic_cast<DqnAgent*>(resumed.get());
  REQUIRE(twin != nullptr);
  for (std::size_t i = 0; i < agent.policy_net().blocks().size(); ++i) {
    CHECK(agent.policy_net().blocks()[i].weights == twin->policy_net().blocks()[i].weights);
    CHECK(agent.policy_net().blocks()[i].biases == twin->policy_net().blocks()[i].biases);
  }
  CHECK(agent.frames() == twin->frames());
  CHECK(agent.update_count() == twin->update_count());
}
