#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "ayrl/errors.hpp"
#include "ayrl/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericError = 3;

ayrl::RunConfig build_config(const std::string& preset, const std::string& config_file,
                             const std::string& agent, long frames, const std::string& out_dir) {
  ayrl::RunConfig config = ayrl::experiment_preset(preset);
  if (!config_file.empty()) ayrl::apply_config_file(config, config_file);
  if (!agent.empty()) config.agent_kind = agent;
  if (frames > 0) config.frame_limit = frames;
  if (!out_dir.empty()) config.out_dir = out_dir;
  return config;
}

int run_train(const std::string& preset, const std::string& config_file, const std::string& agent,
              long frames, const std::string& out_dir, long seed, bool seed_given) {
  ayrl::RunConfig config = build_config(preset, config_file, agent, frames, out_dir);
  if (config.out_dir.empty()) throw ayrl::ConfigError("train: --out is required");

  std::vector<std::uint64_t> seeds = config.seeds;
  if (seed_given) seeds = {static_cast<std::uint64_t>(seed)};

  bool aborted = false;
  for (std::uint64_t s : seeds) {
    std::printf("training agent=%s preset=%s seed=%llu frames=%ld\n", config.agent_kind.c_str(),
                config.preset.c_str(), static_cast<unsigned long long>(s), config.frame_limit);
    std::fflush(stdout);
    const ayrl::RunResult result = ayrl::train(config, s);
    const double rate =
        result.records.empty() ? 0.0 : ayrl::success_rate(result.records);
    std::printf("seed %llu: episodes=%zu frames=%ld mean_return=%.3f success_rate=%.3f%s\n",
                static_cast<unsigned long long>(s), result.records.size(), result.frames,
                ayrl::mean_return(result.records), rate,
                result.aborted ? " [aborted: numeric blowup]" : "");
    std::fflush(stdout);
    if (result.aborted) {
      std::fprintf(stderr, "numeric abort: %s\n", result.abort_reason.c_str());
      aborted = true;
    }
  }
  return aborted ? kNumericError : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AYS world-earth reinforcement learning"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train an agent");
  std::string train_preset = "pb", train_config, train_agent, train_out;
  long train_frames = 0, train_seed = 0;
  train_cmd->add_option("--preset", train_preset, "Experiment preset: pb, policy_cost, simple, noisy, markov");
  train_cmd->add_option("--agent", train_agent, "Agent kind: dqn, duelddqn, a2c, ppo, random");
  auto* seed_opt = train_cmd->add_option("--seed", train_seed, "Run a single seed");
  train_cmd->add_option("--frames", train_frames, "Frame limit");
  train_cmd->add_option("--config", train_config, "Flat key = value config file");
  train_cmd->add_option("--out", train_out, "Output directory");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Run frozen-policy episodes from a checkpoint");
  std::string eval_checkpoint, eval_preset = "pb", eval_config, eval_out = "eval_out";
  long eval_episodes = 10, eval_seed = 0;
  bool eval_greedy = false;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Agent checkpoint")->required();
  eval_cmd->add_option("--episodes", eval_episodes, "Number of evaluation episodes");
  eval_cmd->add_flag("--greedy", eval_greedy, "Fully greedy policy for the Q-learning agents");
  eval_cmd->add_option("--preset", eval_preset, "Environment preset");
  eval_cmd->add_option("--config", eval_config, "Config file");
  eval_cmd->add_option("--out", eval_out, "Output directory for trajectories");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "Sweep the initialisation square");
  std::string grid_checkpoint, grid_mode = "value", grid_preset = "pb", grid_config, grid_out;
  int grid_resolution = 10;
  grid_cmd->add_option("--checkpoint", grid_checkpoint, "Agent checkpoint")->required();
  grid_cmd->add_option("--mode", grid_mode, "value, first-action or end-state");
  grid_cmd->add_option("--resolution", grid_resolution, "Cells per axis");
  grid_cmd->add_option("--preset", grid_preset, "Environment preset");
  grid_cmd->add_option("--config", grid_config, "Config file");
  grid_cmd->add_option("--out", grid_out, "Output CSV path (default grid_<mode>.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (train_cmd->parsed()) {
      return run_train(train_preset, train_config, train_agent, train_frames, train_out,
                       train_seed, seed_opt->count() > 0);
    }
    if (eval_cmd->parsed()) {
      ayrl::RunConfig config = build_config(eval_preset, eval_config, "", 0, "");
      const ayrl::EvalSummary summary = ayrl::evaluate_checkpoint(
          eval_checkpoint, config, eval_episodes, eval_greedy, eval_out,
          static_cast<std::uint64_t>(eval_seed));
      std::printf("episodes=%ld mean_return=%.3f success_rate=%.3f\n", summary.episodes,
                  summary.mean_return, summary.success_rate);
      return kOk;
    }
    if (grid_cmd->parsed()) {
      ayrl::GridMode mode;
      if (grid_mode == "value") {
        mode = ayrl::GridMode::kValue;
      } else if (grid_mode == "first-action") {
        mode = ayrl::GridMode::kFirstAction;
      } else if (grid_mode == "end-state") {
        mode = ayrl::GridMode::kEndState;
      } else {
        throw ayrl::ConfigError("grid: unknown mode '" + grid_mode + "'");
      }
      ayrl::RunConfig config = build_config(grid_preset, grid_config, "", 0, "");
      auto agent = ayrl::load_agent_file(grid_checkpoint);
      ayrl::GridSpec spec;
      spec.resolution = grid_resolution;
      const ayrl::GridResult result = ayrl::grid_sweep(*agent, config, spec, mode);
      const std::string out_path = grid_out.empty() ? "grid_" + grid_mode + ".csv" : grid_out;
      ayrl::write_grid_csv(result, out_path);
      std::printf("wrote %s\n", out_path.c_str());
      return kOk;
    }
  } catch (const ayrl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const ayrl::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kNumericError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kOk;
}
