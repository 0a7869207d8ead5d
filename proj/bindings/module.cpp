#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ayrl/agents.hpp"
#include "ayrl/env.hpp"
#include "ayrl/harness.hpp"
#include "ayrl/nn.hpp"
#include "ayrl/replay.hpp"

namespace py = pybind11;
using namespace ayrl;

namespace {

py::dict record_to_dict(const RunRecord& r) {
  py::dict d;
  d["episode"] = r.episode;
  d["return"] = r.episode_return;
  d["length"] = r.length;
  d["outcome"] = to_string(r.outcome);
  d["frames"] = r.frames_total;
  return d;
}

std::vector<RunRecord> records_from_result(const RunResult& result) { return result.records; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "AYS world-earth model and deep RL agents";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<NumericError>(m, "NumericError");
  py::register_exception<UsageError>(m, "UsageError");

  py::enum_<Action>(m, "Action")
      .value("DEFAULT", Action::kDefault)
      .value("DEGROWTH", Action::kDeGrowth)
      .value("ENERGY_TRANSITION", Action::kEnergyTransition)
      .value("BOTH", Action::kBoth);

  py::enum_<Outcome>(m, "Outcome")
      .value("GREEN_FIXED_POINT", Outcome::kGreenFixedPoint)
      .value("BLACK_FIXED_POINT", Outcome::kBlackFixedPoint)
      .value("CARBON_BOUNDARY", Outcome::kCarbonBoundary)
      .value("ECONOMIC_BOUNDARY", Outcome::kEconomicBoundary)
      .value("FRAME_LIMIT", Outcome::kFrameLimit);

  py::enum_<RewardScheme>(m, "RewardScheme")
      .value("PLANETARY_BOUNDARY", RewardScheme::kPlanetaryBoundary)
      .value("POLICY_COST", RewardScheme::kPolicyCost)
      .value("SIMPLE", RewardScheme::kSimple);

  py::class_<AysParams>(m, "AysParams")
      .def(py::init<>())
      .def_readwrite("tau_carbon", &AysParams::tau_carbon)
      .def_readwrite("tau_knowledge", &AysParams::tau_knowledge)
      .def_readwrite("beta_growth", &AysParams::beta_growth)
      .def_readwrite("sigma_breakeven", &AysParams::sigma_breakeven)
      .def_readwrite("phi_combustion", &AysParams::phi_combustion)
      .def_readwrite("eps_energy", &AysParams::eps_energy)
      .def_readwrite("theta_temperature", &AysParams::theta_temperature)
      .def_readwrite("rho_learning", &AysParams::rho_learning);

  py::class_<RawState>(m, "RawState")
      .def(py::init<double, double, double>(), py::arg("carbon"), py::arg("economy"),
           py::arg("knowledge"))
      .def_readwrite("carbon", &RawState::carbon)
      .def_readwrite("economy", &RawState::economy)
      .def_readwrite("knowledge", &RawState::knowledge);

  py::class_<NormState>(m, "NormState")
      .def(py::init<double, double, double>(), py::arg("carbon"), py::arg("economy"),
           py::arg("knowledge"))
      .def_readwrite("carbon", &NormState::carbon)
      .def_readwrite("economy", &NormState::economy)
      .def_readwrite("knowledge", &NormState::knowledge);

  m.def("normalize", &normalize);
  m.def("denormalize", &denormalize);
  m.def("effective_params", &effective_params);
  m.def("derivatives",
        [](const RawState& raw, const AysParams& p) {
          const auto d = derivatives(raw, p);
          return py::make_tuple(d[0], d[1], d[2]);
        });
  m.def("black_fixed_point", &black_fixed_point);
  m.def("integrate_step", &integrate_step, py::arg("state"), py::arg("action"), py::arg("params"),
        py::arg("substeps") = 10);
  m.def("reward", &reward, py::arg("prev"), py::arg("action"), py::arg("next"), py::arg("scheme"),
        py::arg("terminal"), py::arg("gamma") = 0.99, py::arg("squared_distance") = false);
  m.def("policy_cost_multiplier", &policy_cost_multiplier);

  py::class_<TerminationConfig>(m, "TerminationConfig")
      .def_static("from_params", &TerminationConfig::from_params, py::arg("params"),
                  py::arg("tolerance") = 0.01)
      .def_readonly("carbon_boundary", &TerminationConfig::carbon_boundary)
      .def_readonly("economy_floor", &TerminationConfig::economy_floor)
      .def_readonly("black", &TerminationConfig::black);

  m.def("check_termination", &check_termination);

  py::class_<NoiseSpec>(m, "NoiseSpec")
      .def(py::init<>())
      .def_readwrite("variance", &NoiseSpec::variance)
      .def_readwrite("scheduled", &NoiseSpec::scheduled)
      .def_readwrite("schedule_start", &NoiseSpec::schedule_start)
      .def_readwrite("schedule_multiplier", &NoiseSpec::schedule_multiplier)
      .def_readwrite("schedule_period", &NoiseSpec::schedule_period)
      .def_readwrite("schedule_cap", &NoiseSpec::schedule_cap)
      .def("variance_at", &NoiseSpec::variance_at);

  py::class_<EnvConfig>(m, "EnvConfig")
      .def(py::init<>())
      .def_readwrite("params", &EnvConfig::params)
      .def_readwrite("scheme", &EnvConfig::scheme)
      .def_readwrite("markov", &EnvConfig::markov)
      .def_readwrite("noise", &EnvConfig::noise)
      .def_readwrite("gamma", &EnvConfig::gamma)
      .def_readwrite("episode_step_cap", &EnvConfig::episode_step_cap)
      .def_readwrite("squared_distance_reward", &EnvConfig::squared_distance_reward);

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>())
      .def("uniform", py::overload_cast<>(&Rng::uniform))
      .def("normal", &Rng::normal)
      .def("uniform_int", &Rng::uniform_int);

  py::class_<StepResult>(m, "StepResult")
      .def_readonly("observation", &StepResult::observation)
      .def_readonly("reward", &StepResult::reward)
      .def_readonly("done", &StepResult::done)
      .def_readonly("outcome", &StepResult::outcome);

  py::class_<AysEnv>(m, "AysEnv")
      .def(py::init<EnvConfig>())
      .def("reset", &AysEnv::reset)
      .def("reset_at", &AysEnv::reset_at)
      .def("step", [](AysEnv& env, int action) { return env.step(static_cast<Action>(action)); })
      .def("observation", &AysEnv::observation)
      .def_property_readonly("observation_width", &AysEnv::observation_width)
      .def_property_readonly("state", &AysEnv::state)
      .def_property_readonly("episode_params", &AysEnv::episode_params);

  // network utilities
  m.def("dueling_combine", &dueling_combine);
  m.def("softmax_policy", &softmax_policy);
  m.def("categorical_entropy", &categorical_entropy);
  m.def("compute_gae",
        [](const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
           const std::vector<bool>& dones, double gamma, double lambda, double bootstrap) {
          RolloutBuffer rollout(static_cast<std::size_t>(rewards.size()), gamma, lambda);
          for (Eigen::Index t = 0; t < rewards.size(); ++t) {
            RolloutStep s;
            s.reward = rewards[t];
            s.value = values[t];
            s.done = dones[static_cast<std::size_t>(t)];
            rollout.push(std::move(s));
          }
          const GaeResult g = compute_gae(rollout, bootstrap);
          return py::make_tuple(g.advantages, g.lambda_returns);
        },
        py::arg("rewards"), py::arg("values"), py::arg("dones"), py::arg("gamma"),
        py::arg("lambda_"), py::arg("bootstrap_value"));

  // agents behind the uniform interface
  py::class_<Agent>(m, "Agent")
      .def("act", &Agent::act)
      .def("greedy_act", &Agent::greedy_act)
      .def("eval_act", &Agent::eval_act)
      .def("observe",
           [](Agent& agent, const Eigen::VectorXd& state, int action, double reward_value,
              const Eigen::VectorXd& next_state, bool done) {
             agent.observe({state, action, reward_value, next_state, done});
           })
      .def("maybe_update",
           [](Agent& agent, Rng& rng) {
             const UpdateResult r = agent.maybe_update(rng);
             py::dict d;
             d["updated"] = r.updated;
             d["loss"] = r.loss;
             d["actor_loss"] = r.actor_loss;
             d["critic_loss"] = r.critic_loss;
             return d;
           })
      .def("value_estimate", &Agent::value_estimate)
      .def_property_readonly("kind", &Agent::kind)
      .def_property_readonly("observation_width", &Agent::observation_width)
      .def_property_readonly("frames", &Agent::frames);

  m.def("make_agent",
        [](const std::string& kind, int observation_width, long total_frames,
           std::uint64_t init_seed, const std::map<std::string, double>& overrides,
           double gamma) {
          return make_agent(kind, observation_width, total_frames, init_seed, overrides, gamma);
        },
        py::arg("kind"), py::arg("observation_width") = 3, py::arg("total_frames") = 500000,
        py::arg("init_seed") = 0, py::arg("overrides") = std::map<std::string, double>{},
        py::arg("gamma") = 0.99);
  m.def("load_agent", &load_agent_file);
  m.def("save_agent", &save_agent_file);

  // harness
  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("agent_kind", &RunConfig::agent_kind)
      .def_readwrite("scheme", &RunConfig::scheme)
      .def_readwrite("noise", &RunConfig::noise)
      .def_readwrite("params", &RunConfig::params)
      .def_readwrite("frame_limit", &RunConfig::frame_limit)
      .def_readwrite("episode_limit", &RunConfig::episode_limit)
      .def_readwrite("episode_step_cap", &RunConfig::episode_step_cap)
      .def_readwrite("gamma", &RunConfig::gamma)
      .def_readwrite("squared_distance_reward", &RunConfig::squared_distance_reward)
      .def_readwrite("overrides", &RunConfig::overrides)
      .def_readwrite("out_dir", &RunConfig::out_dir);

  m.def("experiment_preset", &experiment_preset);
  m.def("train",
        [](const RunConfig& config, std::uint64_t seed) {
          const RunResult result = train(config, seed);
          py::list records;
          for (const auto& r : result.records) records.append(record_to_dict(r));
          py::dict d;
          d["records"] = records;
          d["frames"] = result.frames;
          d["checkpoint"] = result.checkpoint_path;
          d["metrics"] = result.metrics_path;
          d["aborted"] = result.aborted;
          return d;
        },
        py::arg("config"), py::arg("seed"));
  m.def("moving_average",
        [](const std::vector<double>& returns, int window) {
          std::vector<RunRecord> records(returns.size());
          for (std::size_t i = 0; i < returns.size(); ++i) records[i].episode_return = returns[i];
          return moving_average(records, window);
        },
        py::arg("returns"), py::arg("window") = 50);
  m.def("evaluate_checkpoint",
        [](const std::string& checkpoint, const RunConfig& config, long episodes, bool greedy,
           const std::string& out_dir, std::uint64_t seed) {
          const EvalSummary s = evaluate_checkpoint(checkpoint, config, episodes, greedy, out_dir,
                                                    seed);
          py::dict d;
          d["episodes"] = s.episodes;
          d["mean_return"] = s.mean_return;
          d["success_rate"] = s.success_rate;
          py::list records;
          for (const auto& r : s.records) records.append(record_to_dict(r));
          d["records"] = records;
          d["action_histories"] = s.action_histories;
          return d;
        },
        py::arg("checkpoint"), py::arg("config"), py::arg("episodes") = 10,
        py::arg("greedy") = false, py::arg("out_dir") = std::string{}, py::arg("seed") = 0);
}
