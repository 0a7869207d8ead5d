#include <doctest.h>

#include <array>
#include <cmath>

#include "ayrl/env.hpp"
#include "ayrl/ode.hpp"
#include "ayrl/rng.hpp"

using namespace ayrl;

namespace {
double rel_diff(double a, double b, double scale) { return std::abs(a - b) / scale; }
}  // namespace

TEST_CASE("normalize maps the reference state to (0.5, 0.5, 0.5)") {
  const NormState n = normalize({240.0, 7e13, 5e11});
  CHECK(n.carbon == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(n.economy == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(n.knowledge == doctest::Approx(0.5).epsilon(1e-14));

  const NormState zero = normalize({0.0, 0.0, 0.0});
  CHECK(zero.carbon == 0.0);
  CHECK(zero.economy == 0.0);
  CHECK(zero.knowledge == 0.0);

  CHECK(normalize({345.0, 7e13, 5e11}).carbon == doctest::Approx(345.0 / 585.0).epsilon(1e-14));
}

TEST_CASE("normalize/denormalize round-trip across twelve orders of magnitude") {
  // A normalized component near 1 stores only ~eps * (1 + raw/ref) relative
  // information about the raw value, so the achievable round-trip error grows
  // with raw/ref: 1e-12 holds through 1e3 * ref, the eps-envelope beyond.
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) {
    const double ea = rng.uniform(-6.0, 6.0);
    const double ey = rng.uniform(-6.0, 6.0);
    const double es = rng.uniform(-6.0, 6.0);
    const RawState raw{240.0 * std::pow(10.0, ea), 7e13 * std::pow(10.0, ey),
                       5e11 * std::pow(10.0, es)};
    const RawState back = denormalize(normalize(raw));
    auto bound = [](double power_of_ten) {
      return power_of_ten <= 3.0 ? 1e-12
                                 : 8.0 * 2.22e-16 * (1.0 + std::pow(10.0, power_of_ten));
    };
    CHECK(rel_diff(back.carbon, raw.carbon, raw.carbon) < bound(ea));
    CHECK(rel_diff(back.economy, raw.economy, raw.economy) < bound(ey));
    CHECK(rel_diff(back.knowledge, raw.knowledge, raw.knowledge) < bound(es));
  }
}

TEST_CASE("denormalize rejects components at or above 1") {
  CHECK_THROWS_AS((void)denormalize({1.0, 0.5, 0.5}), UsageError);
  CHECK_THROWS_AS((void)denormalize({0.5, -0.1, 0.5}), UsageError);
}

TEST_CASE("effective_params: action modifications") {
  const AysParams base;
  const AysParams unchanged = effective_params(base, Action::kDefault);
  CHECK(unchanged.beta_growth == base.beta_growth);
  CHECK(unchanged.sigma_breakeven == base.sigma_breakeven);

  CHECK(effective_params(base, Action::kDeGrowth).beta_growth == doctest::Approx(0.015));
  CHECK(effective_params(base, Action::kEnergyTransition).sigma_breakeven ==
        doctest::Approx(4e12 / std::sqrt(2.0)).epsilon(1e-14));

  const AysParams both = effective_params(base, Action::kBoth);
  CHECK(both.beta_growth == doctest::Approx(0.015));
  CHECK(both.sigma_breakeven == doctest::Approx(4e12 / std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("derivatives vanish at the black fixed point") {
  const AysParams params;
  const RawState black = black_fixed_point(params);
  CHECK(black.carbon == doctest::Approx(0.03 / 8.57e-5).epsilon(1e-12));
  CHECK(black.economy == doctest::Approx(4.7e10 * 0.03 * 147.0 / (8.57e-5 * 50.0)).epsilon(1e-12));

  const auto d = derivatives(black, params);
  CHECK(std::abs(d[0]) / black.carbon < 1e-9);
  CHECK(std::abs(d[1]) / black.economy < 1e-9);
  CHECK(std::abs(d[2]) < 1e-9);  // S = 0 exactly, no renewable production
}

TEST_CASE("fossil share: boundary values and monotone decay") {
  const AysParams params;
  CHECK(fossil_share(0.0, params) == 1.0);
  CHECK(fossil_share(params.sigma_breakeven, params) == doctest::Approx(0.5).epsilon(1e-14));
  double prev = fossil_share(0.0, params);
  for (double s = 1e10; s < 1e15; s *= 2.0) {
    const double share = fossil_share(s, params);
    CHECK(share < prev);
    prev = share;
  }
  CHECK(fossil_share(1e18, params) < 1e-9);
}

TEST_CASE("derivatives: no economy means no energy demand") {
  const AysParams params;
  const auto d = derivatives({100.0, 0.0, 2e11}, params);
  CHECK(d[1] == 0.0);
  CHECK(d[2] == doctest::Approx(-2e11 / 50.0).epsilon(1e-14));
}

TEST_CASE("integrate_step leaves the black fixed point in place") {
  const AysParams params;
  const NormState black = normalize(black_fixed_point(params));
  const NormState next = integrate_step(black, Action::kDefault, params);
  CHECK(std::abs(next.carbon - black.carbon) < 1e-9);
  CHECK(std::abs(next.economy - black.economy) < 1e-9);
  CHECK(std::abs(next.knowledge - black.knowledge) < 1e-9);
}

TEST_CASE("integrate_step matches a 100x finer reference integration") {
  const AysParams params;
  Rng rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    NormState start{rng.uniform(0.3, 0.6), rng.uniform(0.3, 0.6), rng.uniform(0.3, 0.6)};
    if (trial == 0) start = {0.5, 0.5, 0.5};
    const auto action = static_cast<Action>(trial % 4);
    const NormState coarse = integrate_step(start, action, params, 10);
    const NormState fine = integrate_step(start, action, params, 1000);
    CHECK(std::abs(coarse.carbon - fine.carbon) < 1e-8);
    CHECK(std::abs(coarse.economy - fine.economy) < 1e-8);
    CHECK(std::abs(coarse.knowledge - fine.knowledge) < 1e-8);
  }
}

TEST_CASE("rk4 stepper reproduces the Lorenz system against a finer reference") {
  const double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
  auto lorenz = [&](const std::array<double, 3>& y, std::array<double, 3>& dydt) {
    dydt[0] = sigma * (y[1] - y[0]);
    dydt[1] = y[0] * (rho - y[2]) - y[1];
    dydt[2] = y[0] * y[1] - beta * y[2];
  };
  const std::array<double, 3> start{1.0, 1.0, 1.0};
  const auto coarse = rk4_integrate<3>(lorenz, start, 1.0, 1000);
  const auto fine = rk4_integrate<3>(lorenz, start, 1.0, 100000);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(coarse[i] - fine[i]) < 1e-6);
  }
}

TEST_CASE("reward: planetary-boundary distance and scheme variants") {
  const NormState s0{0.5, 0.5, 0.5};
  const double pb = reward(s0, Action::kDefault, s0, RewardScheme::kPlanetaryBoundary,
                           std::nullopt, 0.99);
  CHECK(pb == doctest::Approx(std::sqrt(0.09 * 0.09 + 0.13 * 0.13 + 0.25)).epsilon(1e-12));
  CHECK(pb == doctest::Approx(0.524).epsilon(1e-3));

  const double cost_both =
      reward(s0, Action::kBoth, s0, RewardScheme::kPolicyCost, std::nullopt, 0.99);
  CHECK(cost_both == doctest::Approx(0.25 * pb).epsilon(1e-12));
  const double cost_default =
      reward(s0, Action::kDefault, s0, RewardScheme::kPolicyCost, std::nullopt, 0.99);
  CHECK(cost_default == doctest::Approx(pb).epsilon(1e-12));

  CHECK(reward(s0, Action::kDefault, s0, RewardScheme::kSimple, std::nullopt, 0.99) == 0.0);

  const double squared = reward(s0, Action::kDefault, s0, RewardScheme::kPlanetaryBoundary,
                                std::nullopt, 0.99, true);
  CHECK(squared == doctest::Approx(pb * pb).epsilon(1e-12));
}

TEST_CASE("reward: fixed-point termination adds the geometric tail") {
  const NormState near_green{0.01, 0.99, 0.99};
  const double gamma = 0.99;
  const double base = reward(near_green, Action::kDefault, near_green,
                             RewardScheme::kPlanetaryBoundary, std::nullopt, gamma);
  const double with_bonus = reward(near_green, Action::kDefault, near_green,
                                   RewardScheme::kPlanetaryBoundary,
                                   Outcome::kGreenFixedPoint, gamma);
  CHECK(with_bonus == doctest::Approx(base / (1.0 - gamma)).epsilon(1e-12));

  // a boundary crossing gets no tail
  const double crossed = reward(near_green, Action::kDefault, near_green,
                                RewardScheme::kPlanetaryBoundary, Outcome::kCarbonBoundary, gamma);
  CHECK(crossed == doctest::Approx(base).epsilon(1e-12));

  // the simple scheme pays 1/(1-gamma) on reaching green
  const double simple_green = reward(near_green, Action::kDefault, near_green,
                                     RewardScheme::kSimple, Outcome::kGreenFixedPoint, gamma);
  CHECK(simple_green == doctest::Approx(1.0 / (1.0 - gamma)).epsilon(1e-12));
}

TEST_CASE("check_termination: boundaries and vicinities") {
  const auto cfg = TerminationConfig::from_params(AysParams{});
  CHECK(cfg.carbon_boundary == doctest::Approx(345.0 / 585.0).epsilon(1e-14));
  CHECK(cfg.economy_floor == doctest::Approx(4.0 / 11.0).epsilon(1e-14));

  CHECK(check_termination({0.60, 0.5, 0.5}, cfg) == Outcome::kCarbonBoundary);
  CHECK(check_termination({0.5, 0.30, 0.5}, cfg) == Outcome::kEconomicBoundary);
  CHECK(check_termination({0.005, 0.995, 0.995}, cfg) == Outcome::kGreenFixedPoint);
  CHECK(!check_termination({0.5, 0.5, 0.5}, cfg).has_value());

  // the black vicinity is only reachable below the carbon boundary
  const NormState near_black{cfg.black.carbon - 0.008, cfg.black.economy + 0.002, 0.002};
  if (near_black.carbon <= cfg.carbon_boundary) {
    CHECK(check_termination(near_black, cfg) == Outcome::kBlackFixedPoint);
  }

  // green and black vicinities are far apart
  CHECK(std::abs(cfg.green.carbon - cfg.black.carbon) > 2 * cfg.vicinity_tolerance);
  CHECK(std::abs(cfg.green.economy - cfg.black.economy) > 2 * cfg.vicinity_tolerance);
}

TEST_CASE("noise: schedule values and multiplier clipping") {
  NoiseSpec spec;
  spec.scheduled = true;
  CHECK(spec.variance_at(0) == doctest::Approx(1e-5));
  CHECK(spec.variance_at(499) == doctest::Approx(1e-5));
  CHECK(spec.variance_at(500) == doctest::Approx(1e-4));
  CHECK(spec.variance_at(2500) == doctest::Approx(1.0));
  CHECK(spec.variance_at(99999) == doctest::Approx(1.0));

  // all multipliers clipped to [0.5, 1.5] even at unit variance
  NoiseSpec unit;
  unit.variance = 1.0;
  const AysParams base;
  Rng rng(123);
  for (int i = 0; i < 100000 / 8; ++i) {
    const AysParams p = sample_episode_params(base, unit, 0, rng);
    for (double ratio : {p.tau_carbon / base.tau_carbon, p.beta_growth / base.beta_growth,
                         p.sigma_breakeven / base.sigma_breakeven,
                         p.theta_temperature / base.theta_temperature,
                         p.rho_learning / base.rho_learning, p.eps_energy / base.eps_energy,
                         p.phi_combustion / base.phi_combustion,
                         p.tau_knowledge / base.tau_knowledge}) {
      // multiply-then-divide round trip wobbles in the last ulp
      CHECK(ratio >= 0.5 - 1e-12);
      CHECK(ratio <= 1.5 + 1e-12);
    }
  }

  // zero variance leaves parameters untouched
  NoiseSpec off;
  const AysParams same = sample_episode_params(base, off, 0, rng);
  CHECK(same.beta_growth == base.beta_growth);
  CHECK(same.sigma_breakeven == base.sigma_breakeven);
}

TEST_CASE("fixed-noise protocol: parameters sampled once, reused every episode") {
  EnvConfig cfg;
  cfg.noise.variance = 1e-3;
  cfg.noise.fixed_across_episodes = true;
  AysEnv env(cfg);
  Rng rng(21);
  env.reset(rng);
  const AysParams first = env.episode_params();
  CHECK(first.beta_growth != cfg.params.beta_growth);  // noise did apply
  for (int i = 0; i < 5; ++i) {
    env.reset(rng);
    CHECK(env.episode_params().beta_growth == first.beta_growth);
    CHECK(env.episode_params().sigma_breakeven == first.sigma_breakeven);
  }

  // without the flag each episode draws fresh parameters
  EnvConfig fresh_cfg;
  fresh_cfg.noise.variance = 1e-3;
  AysEnv fresh(fresh_cfg);
  fresh.reset(rng);
  const double beta_a = fresh.episode_params().beta_growth;
  fresh.reset(rng);
  CHECK(fresh.episode_params().beta_growth != beta_a);
}

TEST_CASE("env reset draws the initial square and s stays unperturbed") {
  EnvConfig cfg;
  AysEnv env(cfg);
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    env.reset(rng);
    const NormState& s = env.state();
    CHECK(s.carbon >= 0.45);
    CHECK(s.carbon <= 0.55);
    CHECK(s.economy >= 0.45);
    CHECK(s.economy <= 0.55);
    CHECK(s.knowledge == 0.5);
  }
}

TEST_CASE("episodes are deterministic given seed and action sequence") {
  auto run = [] {
    EnvConfig cfg;
    cfg.noise.variance = 1e-3;
    AysEnv env(cfg);
    Rng rng(99);
    Rng actions(5);
    std::vector<double> rewards;
    for (int ep = 0; ep < 5; ++ep) {
      env.reset(rng);
      for (;;) {
        const StepResult sr = env.step(static_cast<Action>(actions.uniform_int(4)));
        rewards.push_back(sr.reward);
        if (sr.done) break;
      }
    }
    return rewards;
  };
  CHECK(run() == run());
}

TEST_CASE("integration preserves nonnegative states under random actions") {
  EnvConfig cfg;
  cfg.noise.variance = 0.25;  // stress the dynamics with parameter noise
  AysEnv env(cfg);
  Rng rng(2);
  Rng actions(3);
  long violations = 0;
  long steps = 0;
  for (int ep = 0; ep < 10000; ++ep) {
    env.reset(rng);
    for (;;) {
      const StepResult sr = env.step(static_cast<Action>(actions.uniform_int(4)));
      const NormState& s = env.state();
      ++steps;
      if (!(s.carbon >= 0.0 && s.economy >= 0.0 && s.knowledge >= 0.0 && s.carbon < 1.0 &&
            s.economy < 1.0 && s.knowledge < 1.0)) {
        ++violations;
      }
      if (sr.done) break;
    }
  }
  CHECK(violations == 0);
  CHECK(steps > 10000);
}

TEST_CASE("markov variant: velocities accumulate normalized derivatives") {
  EnvConfig cfg;
  cfg.markov = true;
  AysEnv env(cfg);
  Rng rng(4);
  const Eigen::VectorXd obs0 = env.reset(rng);
  REQUIRE(obs0.size() == 6);
  CHECK(obs0[3] == 0.0);
  CHECK(obs0[4] == 0.0);
  CHECK(obs0[5] == 0.0);

  // first step: velocity equals the instantaneous derivative at the new state
  const NormState start = env.state();
  const StepResult s1 = env.step(Action::kDefault);
  const NormState after1 = env.state();
  const auto d1 = normalized_derivatives(denormalize(after1), effective_params(cfg.params, Action::kDefault));
  CHECK(s1.observation[3] == doctest::Approx(d1[0]).epsilon(1e-12));
  CHECK(s1.observation[4] == doctest::Approx(d1[1]).epsilon(1e-12));
  CHECK(s1.observation[5] == doctest::Approx(d1[2]).epsilon(1e-12));

  // second step: previous velocity carried forward
  const StepResult s2 = env.step(Action::kDeGrowth);
  const auto d2 = normalized_derivatives(denormalize(env.state()),
                                         effective_params(cfg.params, Action::kDeGrowth));
  CHECK(s2.observation[3] == doctest::Approx(d1[0] + d2[0]).epsilon(1e-12));
  CHECK(s2.observation[4] == doctest::Approx(d1[1] + d2[1]).epsilon(1e-12));
  CHECK(s2.observation[5] == doctest::Approx(d1[2] + d2[2]).epsilon(1e-12));

  // the positional part matches the 3-wide environment
  EnvConfig plain;
  AysEnv env3(plain);
  env3.reset_at(start);
  const StepResult p1 = env3.step(Action::kDefault);
  CHECK(p1.observation[0] == doctest::Approx(after1.carbon).epsilon(1e-15));
}

TEST_CASE("markov variant: velocity stays zero at a fixed point") {
  EnvConfig cfg;
  cfg.markov = true;
  AysEnv env(cfg);
  const NormState black = normalize(black_fixed_point(cfg.params));
  env.reset_at(black);
  const StepResult sr = env.step(Action::kDefault);
  CHECK(std::abs(sr.observation[3]) < 1e-12);
  CHECK(std::abs(sr.observation[4]) < 1e-12);
  CHECK(std::abs(sr.observation[5]) < 1e-10);
}

TEST_CASE("episode step cap yields the frame-limit outcome") {
  EnvConfig cfg;
  cfg.episode_step_cap = 5;
  AysEnv env(cfg);
  Rng rng(8);
  env.reset(rng);
  StepResult sr;
  for (int i = 0; i < 5; ++i) sr = env.step(Action::kDeGrowth);
  CHECK(sr.done);
  CHECK(sr.outcome == Outcome::kFrameLimit);
}
