#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ayrl/agents.hpp"
#include "ayrl/env.hpp"

namespace ayrl {

enum class EnvVariant : std::uint8_t { kStandard = 0, kNoisy = 1, kMarkov = 2 };

/// Everything that determines a run; (config, seed) pins the byte stream of
/// every output file.
struct RunConfig {
  std::string agent_kind = "dqn";
  std::string preset = "pb";
  RewardScheme scheme = RewardScheme::kPlanetaryBoundary;
  EnvVariant variant = EnvVariant::kStandard;
  NoiseSpec noise;
  AysParams params;
  long frame_limit = 500000;
  long episode_limit = 0;  // 0 = frames only
  int episode_step_cap = 600;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  double gamma = 0.99;
  bool squared_distance_reward = false;
  double vicinity_tolerance = 0.01;
  std::map<std::string, double> overrides;
  std::string out_dir;

  EnvConfig env_config() const;
  int observation_width() const { return variant == EnvVariant::kMarkov ? 6 : 3; }
};

/// The five experiment presets.
RunConfig experiment_preset(const std::string& name);

/// Flat key = value config file; unknown keys are rejected.
void apply_config_file(RunConfig& config, const std::string& path);
void apply_config_line(RunConfig& config, const std::string& key, const std::string& value);

struct RunRecord {
  long episode = 0;
  double episode_return = 0.0;
  long length = 0;
  Outcome outcome = Outcome::kFrameLimit;
  long frames_total = 0;   // cumulative frames at episode end
  double wall_seconds = 0.0;
  // replay statistics at episode end (deterministic, so safe in metrics)
  long buffer_size = -1;        // -1 = agent has no buffer
  double buffer_max_priority = -1.0;
  double buffer_beta = -1.0;
};

struct RunResult {
  std::vector<RunRecord> records;
  std::string checkpoint_path;
  std::string metrics_path;
  long frames = 0;
  double wall_seconds = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

/// Trains one (config, seed) run; writes metrics.jsonl, checkpoint.bin and
/// summary.json under out_dir/seed_<seed>/ when out_dir is set. A numeric
/// blowup stops the run, keeps the last stable checkpoint on disk and marks
/// the result aborted.
RunResult train(const RunConfig& config, std::uint64_t seed);

/// Mean return over the trailing `window` episodes (prefix mean before the
/// window fills).
std::vector<double> moving_average(const std::vector<RunRecord>& records, int window = 50);

/// Fraction of episodes that ended at the Green fixed point.
double success_rate(const std::vector<RunRecord>& records);

double mean_return(const std::vector<RunRecord>& records);

struct EvalSummary {
  long episodes = 0;
  double mean_return = 0.0;
  double success_rate = 0.0;
  std::vector<RunRecord> records;
  std::vector<std::vector<int>> action_histories;
};

/// Frozen-policy episodes; greedy applies to the Q-learning agents. Writes
/// one trajectory_<i>.csv per episode plus summary.json when out_dir is set.
EvalSummary evaluate(Agent& agent, const RunConfig& config, long episodes, bool greedy,
                     const std::string& out_dir, std::uint64_t seed);
EvalSummary evaluate_checkpoint(const std::string& checkpoint_path, const RunConfig& config,
                                long episodes, bool greedy, const std::string& out_dir,
                                std::uint64_t seed);

enum class GridMode : std::uint8_t { kValue = 0, kFirstAction = 1, kEndState = 2 };

/// The initialisation square of the experiments: a and y swept, s fixed.
struct GridSpec {
  double a_min = 0.45, a_max = 0.55;
  double y_min = 0.45, y_max = 0.55;
  double s_fixed = 0.5;
  int resolution = 10;  // cells per axis; 1 = the midpoint only
};

struct GridResult {
  std::vector<double> a_values;
  std::vector<double> y_values;
  std::vector<std::vector<std::string>> cells;  // [a][y], formatted per mode
};

GridResult grid_sweep(Agent& agent, const RunConfig& config, const GridSpec& grid, GridMode mode);
void write_grid_csv(const GridResult& grid, const std::string& path);

/// Normalized trajectory CSV: t,a,y,s,action,reward,outcome.
void write_trajectory_csv(const std::vector<NormState>& states, const std::vector<int>& actions,
                          const std::vector<double>& rewards, std::optional<Outcome> outcome,
                          const std::string& path);

void write_metrics_jsonl(const std::vector<RunRecord>& records, const std::string& path);
std::vector<RunRecord> read_metrics_jsonl(const std::string& path);

}  // namespace ayrl
