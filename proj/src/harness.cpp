#include "ayrl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ayrl/errors.hpp"

namespace ayrl {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string format_sig(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

const std::set<std::string>& override_keys() {
  static const std::set<std::string> keys = {
      "lr",           "lr_actor",      "lr_critic",   "exploration_decay",
      "batch_size",   "buffer_size",   "target_update", "decay_number",
      "per_alpha",    "per_beta",      "double_q_standard", "entropy_coeff",
      "rollout_length", "lambda",      "clip",        "epochs",
      "hidden_width", "hidden_layers", "grad_clip"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

RewardScheme scheme_from_string(const std::string& name) {
  if (name == "pb") return RewardScheme::kPlanetaryBoundary;
  if (name == "policy_cost") return RewardScheme::kPolicyCost;
  if (name == "simple") return RewardScheme::kSimple;
  throw ConfigError("unknown reward scheme '" + name + "'");
}

EnvVariant variant_from_string(const std::string& name) {
  if (name == "standard") return EnvVariant::kStandard;
  if (name == "noisy") return EnvVariant::kNoisy;
  if (name == "markov") return EnvVariant::kMarkov;
  throw ConfigError("unknown environment variant '" + name + "'");
}

}  // namespace

EnvConfig RunConfig::env_config() const {
  EnvConfig e;
  e.params = params;
  e.scheme = scheme;
  e.markov = variant == EnvVariant::kMarkov;
  e.noise = noise;
  e.gamma = gamma;
  e.episode_step_cap = episode_step_cap;
  e.squared_distance_reward = squared_distance_reward;
  e.vicinity_tolerance = vicinity_tolerance;
  return e;
}

RunConfig experiment_preset(const std::string& name) {
  RunConfig config;
  config.preset = name;
  if (name == "pb") {
    // standard environment, planetary-boundary reward
  } else if (name == "policy_cost") {
    config.scheme = RewardScheme::kPolicyCost;
  } else if (name == "simple") {
    config.scheme = RewardScheme::kSimple;
  } else if (name == "noisy") {
    config.variant = EnvVariant::kNoisy;
    config.noise.scheduled = true;
    config.noise.schedule_start = 1e-5;
    config.noise.schedule_multiplier = 10.0;
    config.noise.schedule_period = 500;
    config.noise.schedule_cap = 1.0;
  } else if (name == "markov") {
    config.variant = EnvVariant::kMarkov;
  } else {
    throw ConfigError("unknown experiment preset '" + name + "'");
  }
  return config;
}

void apply_config_line(RunConfig& config, const std::string& key, const std::string& value) {
  if (key == "agent") {
    config.agent_kind = value;
  } else if (key == "preset") {
    const RunConfig preset = experiment_preset(value);
    config.preset = preset.preset;
    config.scheme = preset.scheme;
    config.variant = preset.variant;
    config.noise = preset.noise;
  } else if (key == "reward") {
    config.scheme = scheme_from_string(value);
  } else if (key == "env") {
    config.variant = variant_from_string(value);
  } else if (key == "frames") {
    config.frame_limit = static_cast<long>(parse_number(key, value));
  } else if (key == "episodes") {
    config.episode_limit = static_cast<long>(parse_number(key, value));
  } else if (key == "episode_cap") {
    config.episode_step_cap = static_cast<int>(parse_number(key, value));
  } else if (key == "gamma") {
    config.gamma = parse_number(key, value);
  } else if (key == "seeds") {
    config.seeds.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) {
        config.seeds.push_back(static_cast<std::uint64_t>(parse_number(key, item)));
      }
    }
    if (config.seeds.empty()) throw ConfigError("config key 'seeds': empty list");
  } else if (key == "out") {
    config.out_dir = value;
  } else if (key == "squared_reward") {
    config.squared_distance_reward = parse_number(key, value) != 0.0;
  } else if (key == "vicinity_tolerance") {
    config.vicinity_tolerance = parse_number(key, value);
  } else if (key == "ays_tau_carbon") {
    config.params.tau_carbon = parse_number(key, value);
  } else if (key == "ays_tau_knowledge") {
    config.params.tau_knowledge = parse_number(key, value);
  } else if (key == "ays_beta") {
    config.params.beta_growth = parse_number(key, value);
  } else if (key == "ays_sigma") {
    config.params.sigma_breakeven = parse_number(key, value);
  } else if (key == "ays_phi") {
    config.params.phi_combustion = parse_number(key, value);
  } else if (key == "ays_eps") {
    config.params.eps_energy = parse_number(key, value);
  } else if (key == "ays_theta") {
    config.params.theta_temperature = parse_number(key, value);
  } else if (key == "ays_rho") {
    config.params.rho_learning = parse_number(key, value);
  } else if (key == "noise_variance") {
    config.noise.variance = parse_number(key, value);
    config.noise.scheduled = false;
  } else if (key == "noise_scheduled") {
    config.noise.scheduled = parse_number(key, value) != 0.0;
  } else if (key == "noise_start") {
    config.noise.schedule_start = parse_number(key, value);
  } else if (key == "noise_multiplier") {
    config.noise.schedule_multiplier = parse_number(key, value);
  } else if (key == "noise_period") {
    config.noise.schedule_period = static_cast<long>(parse_number(key, value));
  } else if (key == "noise_cap") {
    config.noise.schedule_cap = parse_number(key, value);
  } else if (key == "noise_fixed") {
    config.noise.fixed_across_episodes = parse_number(key, value) != 0.0;
  } else if (override_keys().count(key) > 0) {
    config.overrides[key] = parse_number(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_config_line(config, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
}

std::vector<double> moving_average(const std::vector<RunRecord>& records, int window) {
  if (window < 1) throw UsageError("moving_average: window must be >= 1");
  std::vector<double> series;
  series.reserve(records.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    acc += records[i].episode_return;
    if (i >= static_cast<std::size_t>(window)) {
      acc -= records[i - static_cast<std::size_t>(window)].episode_return;
    }
    const auto denom = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    series.push_back(acc / static_cast<double>(denom));
  }
  return series;
}

double success_rate(const std::vector<RunRecord>& records) {
  if (records.empty()) throw UsageError("success_rate: no episodes");
  long green = 0;
  for (const auto& r : records) {
    if (r.outcome == Outcome::kGreenFixedPoint) ++green;
  }
  return static_cast<double>(green) / static_cast<double>(records.size());
}

double mean_return(const std::vector<RunRecord>& records) {
  if (records.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : records) acc += r.episode_return;
  return acc / static_cast<double>(records.size());
}

void write_metrics_jsonl(const std::vector<RunRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write metrics file '" + path + "'");
  for (const auto& r : records) {
    json line;
    line["episode"] = r.episode;
    line["return"] = r.episode_return;
    line["length"] = r.length;
    line["outcome"] = to_string(r.outcome);
    line["frames"] = r.frames_total;
    if (r.buffer_size >= 0) line["buffer_size"] = r.buffer_size;
    if (r.buffer_max_priority >= 0.0) line["buffer_max_priority"] = r.buffer_max_priority;
    if (r.buffer_beta >= 0.0) line["buffer_beta"] = r.buffer_beta;
    out << line.dump() << "\n";
  }
}

std::vector<RunRecord> read_metrics_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics file '" + path + "'");
  std::vector<RunRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const json j = json::parse(line);
    RunRecord r;
    r.episode = j.at("episode").get<long>();
    r.episode_return = j.at("return").get<double>();
    r.length = j.at("length").get<long>();
    const auto outcome = outcome_from_string(j.at("outcome").get<std::string>());
    if (!outcome) throw ConfigError("metrics file: unknown outcome in '" + line + "'");
    r.outcome = *outcome;
    r.frames_total = j.at("frames").get<long>();
    r.buffer_size = j.value("buffer_size", -1L);
    r.buffer_max_priority = j.value("buffer_max_priority", -1.0);
    r.buffer_beta = j.value("buffer_beta", -1.0);
    records.push_back(r);
  }
  return records;
}

namespace {
void write_summary_json(const std::string& path, const std::vector<RunRecord>& records,
                        long frames, double wall_seconds, bool aborted,
                        const std::string& abort_reason) {
  json j;
  j["episodes"] = records.size();
  j["frames"] = frames;
  j["mean_return"] = records.empty() ? 0.0 : mean_return(records);
  j["success_rate"] = records.empty() ? 0.0 : success_rate(records);
  j["wall_time_seconds"] = wall_seconds;
  if (aborted) {
    j["aborted"] = true;
    j["abort_reason"] = abort_reason;
  }
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << "\n";
}
}  // namespace

RunResult train(const RunConfig& config, std::uint64_t seed) {
  const double t0 = now_seconds();

  // fixed derivation order: network init, environment, agent streams
  Rng master(seed);
  const std::uint64_t init_seed = master.next_uint64();
  Rng env_rng(master.next_uint64());
  Rng agent_rng(master.next_uint64());

  AysEnv env(config.env_config());
  auto agent = make_agent(config.agent_kind, env.observation_width(), config.frame_limit,
                          init_seed, config.overrides, config.gamma);

  std::string run_dir;
  if (!config.out_dir.empty()) {
    run_dir = (fs::path(config.out_dir) / ("seed_" + std::to_string(seed))).string();
    fs::create_directories(run_dir);
  }

  RunResult result;
  long frames = 0;
  long episode = 0;
  std::string stable_snapshot;  // refreshed at episode boundaries

  auto snapshot_agent = [&]() {
    std::ostringstream buf(std::ios::binary);
    agent->save(buf);
    stable_snapshot = buf.str();
  };
  snapshot_agent();

  try {
    while (frames < config.frame_limit &&
           (config.episode_limit == 0 || episode < config.episode_limit)) {
      Eigen::VectorXd obs = env.reset(env_rng);
      double episode_return = 0.0;
      long length = 0;
      Outcome outcome = Outcome::kFrameLimit;
      const double ep_start = now_seconds();

      for (;;) {
        const int action = agent->act(obs, agent_rng);
        const StepResult sr = env.step(static_cast<Action>(action));
        agent->observe({obs, action, sr.reward, sr.observation, sr.done});
        const UpdateResult ur = agent->maybe_update(agent_rng);
        if (ur.updated && !std::isfinite(ur.loss)) {
          throw NumericError("non-finite loss at frame " + std::to_string(frames));
        }
        episode_return += sr.reward;
        ++length;
        ++frames;
        obs = sr.observation;
        if (sr.done) {
          outcome = *sr.outcome;
          break;
        }
        if (frames >= config.frame_limit) break;  // run cut mid-episode
      }

      RunRecord record{episode, episode_return, length, outcome, frames,
                       now_seconds() - ep_start};
      if (const auto stats = agent->buffer_stats()) {
        record.buffer_size = stats->size;
        record.buffer_max_priority = stats->max_priority;
        record.buffer_beta = stats->beta;
      }
      result.records.push_back(record);
      ++episode;
      if (episode % 50 == 0) snapshot_agent();
    }
  } catch (const NumericError& err) {
    result.aborted = true;
    result.abort_reason = err.what();
  }

  result.frames = frames;
  result.wall_seconds = now_seconds() - t0;

  if (!run_dir.empty()) {
    result.metrics_path = (fs::path(run_dir) / "metrics.jsonl").string();
    write_metrics_jsonl(result.records, result.metrics_path);
    result.checkpoint_path = (fs::path(run_dir) / "checkpoint.bin").string();
    if (result.aborted) {
      // keep the last stable snapshot, not the blown-up parameters
      std::ofstream out(result.checkpoint_path, std::ios::binary);
      out.write(stable_snapshot.data(), static_cast<std::streamsize>(stable_snapshot.size()));
    } else {
      save_agent_file(*agent, result.checkpoint_path);
    }
    write_summary_json((fs::path(run_dir) / "summary.json").string(), result.records, frames,
                       result.wall_seconds, result.aborted, result.abort_reason);
  }
  return result;
}

void write_trajectory_csv(const std::vector<NormState>& states, const std::vector<int>& actions,
                          const std::vector<double>& rewards, std::optional<Outcome> outcome,
                          const std::string& path) {
  if (states.size() != actions.size() + 1 || actions.size() != rewards.size()) {
    throw UsageError("write_trajectory_csv: inconsistent lengths");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write trajectory file '" + path + "'");
  out << "t,a,y,s,action,reward,outcome\n";
  for (std::size_t t = 0; t < states.size(); ++t) {
    out << t << ',' << format_sig(states[t].carbon) << ',' << format_sig(states[t].economy) << ','
        << format_sig(states[t].knowledge) << ',';
    if (t == 0) {
      out << ",,";  // initial state row carries no action or reward
    } else {
      out << actions[t - 1] << ',' << format_sig(rewards[t - 1]) << ',';
      if (t + 1 == states.size() && outcome) out << to_string(*outcome);
    }
    out << "\n";
  }
}

EvalSummary evaluate(Agent& agent, const RunConfig& config, long episodes, bool greedy,
                     const std::string& out_dir, std::uint64_t seed) {
  if (agent.observation_width() != config.observation_width()) {
    throw ConfigError("evaluate: checkpoint observation width " +
                      std::to_string(agent.observation_width()) +
                      " does not match the environment's " +
                      std::to_string(config.observation_width()));
  }

  EvalSummary summary;
  if (episodes <= 0) return summary;

  if (!out_dir.empty()) fs::create_directories(out_dir);
  Rng rng(seed);
  AysEnv env(config.env_config());

  for (long ep = 0; ep < episodes; ++ep) {
    Eigen::VectorXd obs = env.reset(rng);
    std::vector<NormState> states{env.state()};
    std::vector<int> actions;
    std::vector<double> rewards;
    double episode_return = 0.0;
    std::optional<Outcome> outcome;

    for (;;) {
      const int action = agent.eval_act(obs, rng, greedy);
      const StepResult sr = env.step(static_cast<Action>(action));
      actions.push_back(action);
      rewards.push_back(sr.reward);
      states.push_back(env.state());
      episode_return += sr.reward;
      obs = sr.observation;
      if (sr.done) {
        outcome = sr.outcome;
        break;
      }
    }

    RunRecord record;
    record.episode = ep;
    record.episode_return = episode_return;
    record.length = static_cast<long>(actions.size());
    record.outcome = *outcome;
    record.frames_total = 0;
    summary.records.push_back(record);
    summary.action_histories.push_back(actions);

    if (!out_dir.empty()) {
      write_trajectory_csv(states, actions, rewards, outcome,
                           (fs::path(out_dir) / ("trajectory_" + std::to_string(ep) + ".csv"))
                               .string());
    }
  }

  summary.episodes = episodes;
  summary.mean_return = mean_return(summary.records);
  summary.success_rate = success_rate(summary.records);

  if (!out_dir.empty()) {
    json j;
    j["episodes"] = summary.episodes;
    j["mean_return"] = summary.mean_return;
    j["success_rate"] = summary.success_rate;
    j["greedy"] = greedy;
    std::ofstream out((fs::path(out_dir) / "summary.json").string(), std::ios::binary);
    out << j.dump(2) << "\n";
  }
  return summary;
}

EvalSummary evaluate_checkpoint(const std::string& checkpoint_path, const RunConfig& config,
                                long episodes, bool greedy, const std::string& out_dir,
                                std::uint64_t seed) {
  auto agent = load_agent_file(checkpoint_path);
  return evaluate(*agent, config, episodes, greedy, out_dir, seed);
}

namespace {
std::vector<double> axis_values(double lo, double hi, int resolution) {
  std::vector<double> values;
  if (resolution <= 1) {
    values.push_back(0.5 * (lo + hi));
    return values;
  }
  for (int i = 0; i < resolution; ++i) {
    values.push_back(lo + (hi - lo) * static_cast<double>(i) / (resolution - 1));
  }
  return values;
}
}  // namespace

GridResult grid_sweep(Agent& agent, const RunConfig& config, const GridSpec& grid,
                      GridMode mode) {
  if (agent.observation_width() != config.observation_width()) {
    throw ConfigError("grid: checkpoint observation width does not match the environment");
  }
  GridResult result;
  result.a_values = axis_values(grid.a_min, grid.a_max, grid.resolution);
  result.y_values = axis_values(grid.y_min, grid.y_max, grid.resolution);

  const int width = config.observation_width();
  for (double a : result.a_values) {
    std::vector<std::string> row;
    for (double y : result.y_values) {
      const NormState start{a, y, grid.s_fixed};
      Eigen::VectorXd obs = Eigen::VectorXd::Zero(width);
      obs[0] = start.carbon;
      obs[1] = start.economy;
      obs[2] = start.knowledge;
      switch (mode) {
        case GridMode::kValue:
          row.push_back(format_sig(agent.value_estimate(obs)));
          break;
        case GridMode::kFirstAction:
          row.push_back(to_string(static_cast<Action>(agent.greedy_act(obs))));
          break;
        case GridMode::kEndState: {
          AysEnv env(config.env_config());
          Eigen::VectorXd state_obs = env.reset_at(start);
          std::optional<Outcome> outcome;
          for (;;) {
            const StepResult sr = env.step(static_cast<Action>(agent.greedy_act(state_obs)));
            state_obs = sr.observation;
            if (sr.done) {
              outcome = sr.outcome;
              break;
            }
          }
          row.push_back(to_string(*outcome));
          break;
        }
      }
    }
    result.cells.push_back(std::move(row));
  }
  return result;
}

void write_grid_csv(const GridResult& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write grid file '" + path + "'");
  out << "a\\y";
  for (double y : grid.y_values) out << ',' << format_sig(y);
  out << "\n";
  for (std::size_t i = 0; i < grid.a_values.size(); ++i) {
    out << format_sig(grid.a_values[i]);
    for (const auto& cell : grid.cells[i]) out << ',' << cell;
    out << "\n";
  }
}

}  // namespace ayrl
