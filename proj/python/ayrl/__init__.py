"""AYS world-earth model and deep RL agents (pybind11 bindings)."""

from ayrl._core import (  # noqa: F401
    Action,
    Agent,
    AysEnv,
    AysParams,
    ConfigError,
    EnvConfig,
    NoiseSpec,
    NormState,
    NumericError,
    Outcome,
    RawState,
    RewardScheme,
    Rng,
    RunConfig,
    StepResult,
    TerminationConfig,
    UsageError,
    black_fixed_point,
    categorical_entropy,
    check_termination,
    compute_gae,
    denormalize,
    derivatives,
    dueling_combine,
    effective_params,
    evaluate_checkpoint,
    experiment_preset,
    integrate_step,
    load_agent,
    make_agent,
    moving_average,
    normalize,
    policy_cost_multiplier,
    reward,
    save_agent,
    softmax_policy,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
