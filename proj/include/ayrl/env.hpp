#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "ayrl/rng.hpp"

namespace ayrl {

/// AYS model parameters (defaults from Kittel et al.).
struct AysParams {
  double tau_carbon = 50.0;              // carbon decay time, years
  double tau_knowledge = 50.0;           // knowledge decay time, years
  double beta_growth = 0.03;             // economic growth rate, 1/yr
  double sigma_breakeven = 4e12;         // break-even knowledge, GJ
  double phi_combustion = 4.7e10;        // fossil combustion efficiency, GJ/GtC
  double eps_energy = 147.0;             // energy cost, $/GJ
  double theta_temperature = 8.57e-5;    // temperature sensitivity
  double rho_learning = 2.0;             // renewable learning exponent

  bool all_positive() const;
};

/// Physical-unit state: excess atmospheric carbon (GtC), economic output
/// ($/yr), renewable knowledge (GJ).
struct RawState {
  double carbon = 0.0;
  double economy = 0.0;
  double knowledge = 0.0;
};

/// State mapped component-wise onto [0, 1) by x / (x + x0).
struct NormState {
  double carbon = 0.0;
  double economy = 0.0;
  double knowledge = 0.0;
};

/// Reference point for normalization; also the nominal current state of the
/// Earth in this model.
inline constexpr RawState kInitialRaw{240.0, 7e13, 5e11};

inline constexpr double kCarbonBoundaryRaw = 345.0;  // GtC
inline constexpr double kEconomyFloorRaw = 4e13;     // $/yr

/// Distance target of the planetary-boundary reward in normalized space.
inline constexpr NormState kRewardTarget{0.59, 0.37, 0.0};

enum class Action : std::uint8_t {
  kDefault = 0,
  kDeGrowth = 1,          // halves economic growth
  kEnergyTransition = 2,  // cuts break-even knowledge by 1/sqrt(2)
  kBoth = 3,              // both modifications
};
inline constexpr int kNumActions = 4;

enum class RewardScheme : std::uint8_t { kPlanetaryBoundary = 0, kPolicyCost = 1, kSimple = 2 };

enum class Outcome : std::uint8_t {
  kGreenFixedPoint = 0,
  kBlackFixedPoint = 1,
  kCarbonBoundary = 2,
  kEconomicBoundary = 3,
  kFrameLimit = 4,
};

std::string to_string(Outcome outcome);
std::string to_string(Action action);
std::optional<Outcome> outcome_from_string(const std::string& name);

NormState normalize(const RawState& raw);
RawState denormalize(const NormState& norm);

AysParams effective_params(const AysParams& base, Action action);

/// Share of energy demand met by fossil fuels: 1 / (1 + (S / sigma)^rho),
/// exactly 1 at S = 0 and 0.5 at the break-even knowledge.
double fossil_share(double knowledge, const AysParams& params);

/// Right-hand sides (dA/dt, dY/dt, dS/dt) in raw units.
std::array<double, 3> derivatives(const RawState& raw, const AysParams& params);

/// The same derivatives pushed through the normalization map.
std::array<double, 3> normalized_derivatives(const RawState& raw, const AysParams& params);

/// Undesirable equilibrium (stagnant economy, zero knowledge) for the given
/// parameters.
RawState black_fixed_point(const AysParams& params);

/// Advances the raw-space ODE by one year under the action's parameters.
NormState integrate_step(const NormState& norm, Action action, const AysParams& params,
                         int substeps = 10);

/// Termination geometry, fixed per environment from its base parameters.
struct TerminationConfig {
  double carbon_boundary = 0.0;   // normalized a above which the episode ends
  double economy_floor = 0.0;     // normalized y below which the episode ends
  NormState green{0.0, 1.0, 1.0};
  NormState black{};
  double vicinity_tolerance = 0.01;  // L-inf radius around the fixed points

  static TerminationConfig from_params(const AysParams& params, double tolerance = 0.01);
};

std::optional<Outcome> check_termination(const NormState& norm, const TerminationConfig& cfg);

/// Per-step reward. PB measures the distance from the post-step state to the
/// boundary corner; PolicyCost scales it by the action's cost multiplier;
/// Simple pays only at termination. Reaching a fixed point adds the
/// geometric-series tail reward * gamma / (1 - gamma).
double reward(const NormState& prev, Action action, const NormState& next, RewardScheme scheme,
              std::optional<Outcome> terminal, double gamma, bool squared_distance = false);

double policy_cost_multiplier(Action action);

/// Episode-level parameter noise: every parameter is scaled by an independent
/// clipped Gaussian factor. The scheduled variant grows the variance
/// geometrically with the episode index.
struct NoiseSpec {
  double variance = 0.0;
  double clip_low = 0.5;
  double clip_high = 1.5;
  bool scheduled = false;
  double schedule_start = 1e-5;
  double schedule_multiplier = 10.0;
  long schedule_period = 500;  // episodes per variance bump
  double schedule_cap = 1.0;
  bool fixed_across_episodes = false;  // sample once, reuse (testing protocol)

  double variance_at(long episode_index) const;
};

AysParams sample_episode_params(const AysParams& base, const NoiseSpec& noise, long episode_index,
                                Rng& rng);

struct EnvConfig {
  AysParams params;
  RewardScheme scheme = RewardScheme::kPlanetaryBoundary;
  bool markov = false;  // 6-wide observations with accumulated velocities
  NoiseSpec noise;
  double gamma = 0.99;
  int episode_step_cap = 600;
  bool squared_distance_reward = false;
  double vicinity_tolerance = 0.01;
  int rk4_substeps = 10;
};

struct StepResult {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool done = false;
  std::optional<Outcome> outcome;
};

/// The AYS environment. One instance is owned by one run; all stochasticity
/// comes through the Rng handed to reset().
class AysEnv {
 public:
  explicit AysEnv(EnvConfig config);

  int observation_width() const { return config_.markov ? 6 : 3; }

  /// Starts an episode at (0.5 + U(-.05,.05), 0.5 + U(-.05,.05), 0.5) with
  /// freshly sampled episode parameters.
  Eigen::VectorXd reset(Rng& rng);

  /// Starts an episode at a fixed state with the base parameters (grid sweeps
  /// and deterministic evaluation).
  Eigen::VectorXd reset_at(const NormState& start);

  StepResult step(Action action);

  const NormState& state() const { return state_; }
  const AysParams& episode_params() const { return episode_params_; }
  const TerminationConfig& termination() const { return termination_; }
  const EnvConfig& config() const { return config_; }
  int steps_in_episode() const { return steps_in_episode_; }
  long episodes_started() const { return episodes_started_; }

  Eigen::VectorXd observation() const;

 private:
  EnvConfig config_;
  TerminationConfig termination_;
  NormState state_{};
  std::array<double, 3> velocity_{0.0, 0.0, 0.0};  // markov accumulation
  AysParams episode_params_;
  std::optional<AysParams> frozen_noisy_params_;
  int steps_in_episode_ = 0;
  long episodes_started_ = 0;
  bool episode_open_ = false;
};

}  // namespace ayrl
