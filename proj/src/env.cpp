#include "ayrl/env.hpp"

#include <algorithm>
#include <cmath>

#include "ayrl/errors.hpp"
#include "ayrl/ode.hpp"

namespace ayrl {

bool AysParams::all_positive() const {
  return tau_carbon > 0 && tau_knowledge > 0 && beta_growth > 0 && sigma_breakeven > 0 &&
         phi_combustion > 0 && eps_energy > 0 && theta_temperature > 0 && rho_learning > 0;
}

std::string to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kGreenFixedPoint: return "green_fixed_point";
    case Outcome::kBlackFixedPoint: return "black_fixed_point";
    case Outcome::kCarbonBoundary: return "carbon_boundary";
    case Outcome::kEconomicBoundary: return "economic_boundary";
    case Outcome::kFrameLimit: return "frame_limit";
  }
  return "unknown";
}

std::optional<Outcome> outcome_from_string(const std::string& name) {
  for (auto o : {Outcome::kGreenFixedPoint, Outcome::kBlackFixedPoint, Outcome::kCarbonBoundary,
                 Outcome::kEconomicBoundary, Outcome::kFrameLimit}) {
    if (to_string(o) == name) return o;
  }
  return std::nullopt;
}

std::string to_string(Action action) {
  switch (action) {
    case Action::kDefault: return "default";
    case Action::kDeGrowth: return "dg";
    case Action::kEnergyTransition: return "et";
    case Action::kBoth: return "dg_et";
  }
  return "unknown";
}

namespace {
double normalize_component(double raw, double reference) { return raw / (raw + reference); }

double denormalize_component(double norm, double reference, const char* name) {
  if (norm < 0.0 || norm >= 1.0) {
    throw UsageError(std::string("denormalize: component ") + name + " outside [0, 1)");
  }
  return norm * reference / (1.0 - norm);
}
}  // namespace

NormState normalize(const RawState& raw) {
  return {normalize_component(raw.carbon, kInitialRaw.carbon),
          normalize_component(raw.economy, kInitialRaw.economy),
          normalize_component(raw.knowledge, kInitialRaw.knowledge)};
}

RawState denormalize(const NormState& norm) {
  return {denormalize_component(norm.carbon, kInitialRaw.carbon, "a"),
          denormalize_component(norm.economy, kInitialRaw.economy, "y"),
          denormalize_component(norm.knowledge, kInitialRaw.knowledge, "s")};
}

AysParams effective_params(const AysParams& base, Action action) {
  AysParams p = base;
  if (action == Action::kDeGrowth || action == Action::kBoth) {
    p.beta_growth = base.beta_growth / 2.0;
  }
  if (action == Action::kEnergyTransition || action == Action::kBoth) {
    p.sigma_breakeven = base.sigma_breakeven / std::sqrt(2.0);
  }
  return p;
}

double fossil_share(double knowledge, const AysParams& params) {
  const double ratio = knowledge / params.sigma_breakeven;
  return 1.0 / (1.0 + std::pow(ratio, params.rho_learning));
}

std::array<double, 3> derivatives(const RawState& raw, const AysParams& params) {
  const double demand = raw.economy / params.eps_energy;                  // GJ/yr
  const double share = fossil_share(raw.knowledge, params);
  const double emissions = share * demand / params.phi_combustion;        // GtC/yr
  const double renewable = (1.0 - share) * demand;                        // GJ/yr

  return {emissions - raw.carbon / params.tau_carbon,
          params.beta_growth * raw.economy - params.theta_temperature * raw.carbon * raw.economy,
          renewable - raw.knowledge / params.tau_knowledge};
}

std::array<double, 3> normalized_derivatives(const RawState& raw, const AysParams& params) {
  const auto d = derivatives(raw, params);
  // d/dt [x / (x + x0)] = x0 x' / (x + x0)^2
  auto scale = [](double x, double x0) { return x0 / ((x + x0) * (x + x0)); };
  return {d[0] * scale(raw.carbon, kInitialRaw.carbon),
          d[1] * scale(raw.economy, kInitialRaw.economy),
          d[2] * scale(raw.knowledge, kInitialRaw.knowledge)};
}

RawState black_fixed_point(const AysParams& params) {
  const double carbon = params.beta_growth / params.theta_temperature;
  const double economy = params.phi_combustion * params.beta_growth * params.eps_energy /
                         (params.theta_temperature * params.tau_carbon);
  return {carbon, economy, 0.0};
}

NormState integrate_step(const NormState& norm, Action action, const AysParams& params,
                         int substeps) {
  const AysParams p = effective_params(params, action);
  const RawState raw = denormalize(norm);
  auto deriv = [&p](const std::array<double, 3>& y, std::array<double, 3>& dydt) {
    // clamp transient negatives from roundoff so the powers stay real
    RawState state{std::max(y[0], 0.0), std::max(y[1], 0.0), std::max(y[2], 0.0)};
    dydt = derivatives(state, p);
  };
  std::array<double, 3> y{raw.carbon, raw.economy, raw.knowledge};
  y = rk4_integrate<3>(deriv, y, 1.0, substeps);
  RawState next{std::max(y[0], 0.0), std::max(y[1], 0.0), std::max(y[2], 0.0)};
  return normalize(next);
}

TerminationConfig TerminationConfig::from_params(const AysParams& params, double tolerance) {
  TerminationConfig cfg;
  cfg.carbon_boundary = normalize_component(kCarbonBoundaryRaw, kInitialRaw.carbon);
  cfg.economy_floor = normalize_component(kEconomyFloorRaw, kInitialRaw.economy);
  cfg.green = {0.0, 1.0, 1.0};
  cfg.black = normalize(black_fixed_point(params));
  cfg.vicinity_tolerance = tolerance;
  return cfg;
}

namespace {
bool within_vicinity(const NormState& s, const NormState& target, double tol) {
  return std::abs(s.carbon - target.carbon) < tol && std::abs(s.economy - target.economy) < tol &&
         std::abs(s.knowledge - target.knowledge) < tol;
}
}  // namespace

std::optional<Outcome> check_termination(const NormState& norm, const TerminationConfig& cfg) {
  if (norm.carbon > cfg.carbon_boundary) return Outcome::kCarbonBoundary;
  if (norm.economy < cfg.economy_floor) return Outcome::kEconomicBoundary;
  if (within_vicinity(norm, cfg.green, cfg.vicinity_tolerance)) return Outcome::kGreenFixedPoint;
  if (within_vicinity(norm, cfg.black, cfg.vicinity_tolerance)) return Outcome::kBlackFixedPoint;
  return std::nullopt;
}

double policy_cost_multiplier(Action action) {
  switch (action) {
    case Action::kDefault: return 1.0;
    case Action::kDeGrowth: return 0.5;
    case Action::kEnergyTransition: return 0.5;
    case Action::kBoth: return 0.25;
  }
  return 1.0;
}

double reward(const NormState& /*prev*/, Action action, const NormState& next,
              RewardScheme scheme, std::optional<Outcome> terminal, double gamma,
              bool squared_distance) {
  double r = 0.0;
  switch (scheme) {
    case RewardScheme::kPlanetaryBoundary:
    case RewardScheme::kPolicyCost: {
      const double da = next.carbon - kRewardTarget.carbon;
      const double dy = next.economy - kRewardTarget.economy;
      const double ds = next.knowledge - kRewardTarget.knowledge;
      const double sq = da * da + dy * dy + ds * ds;
      r = squared_distance ? sq : std::sqrt(sq);
      if (scheme == RewardScheme::kPolicyCost) r *= policy_cost_multiplier(action);
      break;
    }
    case RewardScheme::kSimple: {
      if (terminal == Outcome::kGreenFixedPoint) {
        r = 1.0;
      } else if (terminal == Outcome::kCarbonBoundary || terminal == Outcome::kEconomicBoundary) {
        r = -1.0;
      }
      break;
    }
  }
  // approximate the future discounted return on reaching a fixed point
  if (terminal == Outcome::kGreenFixedPoint || terminal == Outcome::kBlackFixedPoint) {
    r += r * gamma / (1.0 - gamma);
  }
  return r;
}

double NoiseSpec::variance_at(long episode_index) const {
  if (!scheduled) return variance;
  const long bumps = episode_index / schedule_period;
  const double v = schedule_start * std::pow(schedule_multiplier, static_cast<double>(bumps));
  return std::min(v, schedule_cap);
}

AysParams sample_episode_params(const AysParams& base, const NoiseSpec& noise, long episode_index,
                                Rng& rng) {
  const double var = noise.variance_at(episode_index);
  if (var <= 0.0) return base;
  const double sd = std::sqrt(var);
  auto draw = [&]() {
    return std::clamp(rng.normal(1.0, sd), noise.clip_low, noise.clip_high);
  };
  AysParams p = base;
  p.tau_carbon *= draw();
  p.tau_knowledge *= draw();
  p.beta_growth *= draw();
  p.sigma_breakeven *= draw();
  p.phi_combustion *= draw();
  p.eps_energy *= draw();
  p.theta_temperature *= draw();
  p.rho_learning *= draw();
  return p;
}

AysEnv::AysEnv(EnvConfig config)
    : config_(std::move(config)),
      termination_(TerminationConfig::from_params(config_.params, config_.vicinity_tolerance)),
      episode_params_(config_.params) {
  if (!config_.params.all_positive()) throw ConfigError("AysEnv: parameters must be positive");
}

Eigen::VectorXd AysEnv::observation() const {
  Eigen::VectorXd obs(observation_width());
  obs[0] = state_.carbon;
  obs[1] = state_.economy;
  obs[2] = state_.knowledge;
  if (config_.markov) {
    obs[3] = velocity_[0];
    obs[4] = velocity_[1];
    obs[5] = velocity_[2];
  }
  return obs;
}

Eigen::VectorXd AysEnv::reset(Rng& rng) {
  state_ = {0.5 + rng.uniform(-0.05, 0.05), 0.5 + rng.uniform(-0.05, 0.05), 0.5};
  if (config_.noise.fixed_across_episodes) {
    if (!frozen_noisy_params_) {
      frozen_noisy_params_ = sample_episode_params(config_.params, config_.noise, 0, rng);
    }
    episode_params_ = *frozen_noisy_params_;
  } else {
    episode_params_ = sample_episode_params(config_.params, config_.noise, episodes_started_, rng);
  }
  velocity_ = {0.0, 0.0, 0.0};
  steps_in_episode_ = 0;
  ++episodes_started_;
  episode_open_ = true;
  return observation();
}

Eigen::VectorXd AysEnv::reset_at(const NormState& start) {
  state_ = start;
  episode_params_ = config_.params;
  velocity_ = {0.0, 0.0, 0.0};
  steps_in_episode_ = 0;
  ++episodes_started_;
  episode_open_ = true;
  return observation();
}

StepResult AysEnv::step(Action action) {
  if (!episode_open_) throw UsageError("step: episode not open; call reset first");
  const NormState prev = state_;
  NormState next = integrate_step(prev, action, episode_params_, config_.rk4_substeps);

  ++steps_in_episode_;
  std::optional<Outcome> outcome = check_termination(next, termination_);
  if (!outcome && steps_in_episode_ >= config_.episode_step_cap) {
    outcome = Outcome::kFrameLimit;
  }

  const double r = reward(prev, action, next, config_.scheme, outcome, config_.gamma,
                          config_.squared_distance_reward);

  state_ = next;
  if (config_.markov) {
    const AysParams effective = effective_params(episode_params_, action);
    const auto deriv = normalized_derivatives(denormalize(next), effective);
    velocity_[0] += deriv[0];
    velocity_[1] += deriv[1];
    velocity_[2] += deriv[2];
  }
  if (outcome) episode_open_ = false;

  return {observation(), r, outcome.has_value(), outcome};
}

}  // namespace ayrl
